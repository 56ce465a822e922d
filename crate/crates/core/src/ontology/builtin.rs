use std::collections::HashMap;
use std::sync::Arc;

use super::{Antecedent, Consequent, Rule, RuleBase};
use crate::error::{Error, Result};
use crate::superpixel::UnitStatus;
use crate::taxonomy::{ClassId, ClassSet, ElevationBand, Taxonomy};

/// DSL source of the built-in rule base, written against [`Taxonomy::ucm`].
pub const BUILTIN_RULES: &str = include_str!("../../rules/builtin.rules");

/// Maps the canonical class names used by the built-in rules onto a taxonomy.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NameBindings {
    map: HashMap<String, ClassId>,
}

impl NameBindings {
    /// Bind every canonical name to the taxonomy class of the same name.
    pub fn by_name(taxonomy: &Taxonomy) -> Self {
        let map = taxonomy
            .classes()
            .iter()
            .map(|c| (c.name.clone(), c.id))
            .collect();
        NameBindings { map }
    }

    pub fn bind(mut self, name: impl Into<String>, id: ClassId) -> Self {
        self.map.insert(name.into(), id);
        self
    }

    pub fn get(&self, name: &str) -> Option<ClassId> {
        self.map.get(name).copied()
    }

    fn resolve(&self, names: &[&str], taxonomy: &Taxonomy) -> ClassSet {
        names
            .iter()
            .filter_map(|n| self.get(n))
            .filter(|id| taxonomy.contains(*id))
            .collect()
    }
}

enum SetSpec {
    Names(&'static [&'static str]),
    Band(ElevationBand),
}

enum AnteSpec {
    SurroundedBy(&'static [&'static str]),
    NoNeighborOf(&'static [&'static str]),
    NeighborhoodContains(&'static [&'static str]),
    Always,
}

struct Spec {
    id: &'static str,
    status: UnitStatus,
    subject: SetSpec,
    antecedent: AnteSpec,
    consequent: Consequent,
}

use UnitStatus::{Classified as Ok_, MisClassified as Mis};

const INTRA: &[Spec] = &[
    Spec {
        id: "r1",
        status: Mis,
        subject: SetSpec::Names(&["Vegetation"]),
        antecedent: AnteSpec::SurroundedBy(&["Ground", "Pavement", "Building", "Water"]),
        consequent: Consequent::AdoptSurroundClass,
    },
    Spec {
        id: "r2",
        status: Mis,
        subject: SetSpec::Names(&["Ground"]),
        antecedent: AnteSpec::SurroundedBy(&["Pavement", "Building", "Water"]),
        consequent: Consequent::AdoptSurroundClass,
    },
    Spec {
        id: "r3",
        status: Mis,
        subject: SetSpec::Names(&["Building"]),
        antecedent: AnteSpec::SurroundedBy(&["Ground", "Water"]),
        consequent: Consequent::AdoptSurroundClass,
    },
    Spec {
        id: "r4",
        status: Mis,
        subject: SetSpec::Names(&["Water"]),
        antecedent: AnteSpec::SurroundedBy(&["Vegetation", "Building", "Pavement"]),
        consequent: Consequent::AdoptSurroundClass,
    },
    Spec {
        id: "r5",
        status: Mis,
        subject: SetSpec::Names(&["Airplane"]),
        antecedent: AnteSpec::SurroundedBy(&["Vegetation", "Building", "Water"]),
        consequent: Consequent::AdoptSurroundClass,
    },
    Spec {
        id: "r6",
        status: Mis,
        subject: SetSpec::Names(&["Car"]),
        antecedent: AnteSpec::SurroundedBy(&["Vegetation", "Water"]),
        consequent: Consequent::AdoptSurroundClass,
    },
    Spec {
        id: "r7",
        status: Mis,
        subject: SetSpec::Names(&["Airplane"]),
        antecedent: AnteSpec::NoNeighborOf(&["Pavement"]),
        consequent: Consequent::AdoptMaxClass,
    },
    Spec {
        id: "r8",
        status: Mis,
        subject: SetSpec::Names(&["Car"]),
        antecedent: AnteSpec::NoNeighborOf(&["Pavement"]),
        consequent: Consequent::AdoptMaxClass,
    },
    Spec {
        id: "r9",
        status: Mis,
        subject: SetSpec::Names(&["Ship"]),
        antecedent: AnteSpec::NoNeighborOf(&["Water"]),
        consequent: Consequent::AdoptMaxClass,
    },
];

const EXTRA: &[Spec] = &[
    Spec {
        id: "e1",
        status: Mis,
        subject: SetSpec::Names(&["Pavement", "Ground", "Water", "Car"]),
        antecedent: AnteSpec::NeighborhoodContains(&["Building"]),
        consequent: Consequent::AssertShadow(1),
    },
    Spec {
        id: "e2",
        status: Mis,
        subject: SetSpec::Names(&["Vegetation", "Car", "Ship", "Airplane"]),
        antecedent: AnteSpec::NoNeighborOf(&["Building"]),
        consequent: Consequent::AssertShadow(-1),
    },
    Spec {
        id: "e3",
        status: Ok_,
        subject: SetSpec::Names(&["Ground"]),
        antecedent: AnteSpec::NoNeighborOf(&["Building", "Vegetation"]),
        consequent: Consequent::AssertShadow(-1),
    },
    Spec {
        id: "e4",
        status: Ok_,
        subject: SetSpec::Names(&["Building"]),
        antecedent: AnteSpec::Always,
        consequent: Consequent::AssertShadow(-1),
    },
    Spec {
        id: "e5",
        status: Ok_,
        subject: SetSpec::Band(ElevationBand::Low),
        antecedent: AnteSpec::Always,
        consequent: Consequent::AssertElevation(0),
    },
    Spec {
        id: "e6",
        status: Ok_,
        subject: SetSpec::Band(ElevationBand::Medium),
        antecedent: AnteSpec::Always,
        consequent: Consequent::AssertElevation(1),
    },
    Spec {
        id: "e7",
        status: Ok_,
        subject: SetSpec::Band(ElevationBand::High),
        antecedent: AnteSpec::Always,
        consequent: Consequent::AssertElevation(2),
    },
];

/// Resolve specs against a taxonomy. Unbound names are dropped from their
/// sets; a rule whose subject or antecedent set ends up empty is dropped.
fn instantiate(
    specs: &[Spec],
    taxonomy: &Arc<Taxonomy>,
    bindings: &NameBindings,
) -> Result<RuleBase> {
    if taxonomy.is_empty() {
        return Err(Error::Taxonomy("empty taxonomy".into()));
    }
    let mut rules = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let subject = match s.subject {
            SetSpec::Names(names) => bindings.resolve(names, taxonomy),
            SetSpec::Band(band) => taxonomy.with_band(band),
        };
        if subject.is_empty() {
            continue;
        }
        let set = |names: &[&str]| {
            let s = bindings.resolve(names, taxonomy);
            (!s.is_empty()).then_some(s)
        };
        let antecedent = match s.antecedent {
            AnteSpec::SurroundedBy(n) => set(n).map(Antecedent::SurroundedBy),
            AnteSpec::NoNeighborOf(n) => set(n).map(Antecedent::NoNeighborOf),
            AnteSpec::NeighborhoodContains(n) => set(n).map(Antecedent::NeighborhoodContains),
            AnteSpec::Always => Some(Antecedent::Unconditional),
        };
        let Some(antecedent) = antecedent else {
            continue;
        };
        rules.push(Rule::new(
            s.id,
            s.status,
            subject,
            antecedent,
            s.consequent,
            i as i64 + 1,
        )?);
    }
    RuleBase::new(rules, taxonomy.clone())
}

/// Hole-filling and context-violation correction rules.
pub fn builtin_intra_rules(taxonomy: &Arc<Taxonomy>, bindings: &NameBindings) -> Result<RuleBase> {
    instantiate(INTRA, taxonomy, bindings)
}

/// Shadow and relative-elevation rules. Elevation subjects come from the
/// taxonomy's elevation bands rather than fixed class names.
pub fn builtin_extra_rules(taxonomy: &Arc<Taxonomy>, bindings: &NameBindings) -> Result<RuleBase> {
    instantiate(EXTRA, taxonomy, bindings)
}

/// Both built-in rule bases, with classes bound by name.
pub fn builtin_rules(taxonomy: &Arc<Taxonomy>) -> Result<RuleBase> {
    let b = NameBindings::by_name(taxonomy);
    builtin_intra_rules(taxonomy, &b)?.union(&builtin_extra_rules(taxonomy, &b)?)
}
