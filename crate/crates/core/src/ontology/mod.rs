//! Symbolic rules over inference units.
//!
//! A rule names the status and classes of the unit it applies to, a spatial
//! antecedent over the unit's correctly classified neighbors, and a consequent:
//! either a relabeling (intra-taxonomy correction) or a shadow/elevation
//! assertion (extra-taxonomy channels). Rules are tried in priority order and
//! the first one that fires decides the outcome for a unit.

mod builtin;
mod dsl;
mod reasoner;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::superpixel::UnitStatus;
use crate::taxonomy::{ClassId, ClassSet, Taxonomy};

pub use builtin::{
    builtin_extra_rules, builtin_intra_rules, builtin_rules, NameBindings, BUILTIN_RULES,
};
pub use dsl::parse_rules;
pub use reasoner::{
    apply_extra, apply_intra, apply_intra_in_order, intra_corrections, post_correction_snapshot,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    IntraCorrection,
    ExtraShadow,
    ExtraElevation,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::IntraCorrection => "IntraCorrection",
            RuleKind::ExtraShadow => "ExtraShadow",
            RuleKind::ExtraElevation => "ExtraElevation",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Antecedent {
    /// At least one Classified neighbor, and every Classified neighbor is in the set.
    SurroundedBy(ClassSet),
    /// No Classified neighbor is in the set.
    NoNeighborOf(ClassSet),
    /// Some Classified neighbor is in the set.
    NeighborhoodContains(ClassSet),
    Unconditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consequent {
    AdoptSurroundClass,
    AdoptMaxClass,
    /// `+1` shadow or `-1` no shadow.
    AssertShadow(i8),
    /// `0` low, `1` medium, `2` high.
    AssertElevation(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub subject_status: UnitStatus,
    pub subject_classes: ClassSet,
    pub antecedent: Antecedent,
    pub consequent: Consequent,
    pub priority: i64,
}

impl Rule {
    pub fn new(
        id: impl Into<String>,
        subject_status: UnitStatus,
        subject_classes: ClassSet,
        antecedent: Antecedent,
        consequent: Consequent,
        priority: i64,
    ) -> Result<Self> {
        let rule = Rule {
            id: id.into(),
            subject_status,
            subject_classes,
            antecedent,
            consequent,
            priority,
        };
        rule.validate()?;
        Ok(rule)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Parameter(format!("rule `{}`: {msg}", self.id)));
        if self.id.is_empty() {
            return bad("empty id");
        }
        if self.subject_classes.is_empty() {
            return bad("empty subject class set");
        }
        match self.consequent {
            Consequent::AssertShadow(v) if v != 1 && v != -1 => {
                return bad("shadow must be +1 or -1")
            }
            Consequent::AssertElevation(v) if v > 2 => return bad("elevation must be 0, 1 or 2"),
            _ => {}
        }
        if self.kind() == RuleKind::IntraCorrection
            && self.subject_status != UnitStatus::MisClassified
        {
            return bad("correction rules apply to misclassified units only");
        }
        Ok(())
    }

    pub fn kind(&self) -> RuleKind {
        match self.consequent {
            Consequent::AdoptSurroundClass | Consequent::AdoptMaxClass => RuleKind::IntraCorrection,
            Consequent::AssertShadow(_) => RuleKind::ExtraShadow,
            Consequent::AssertElevation(_) => RuleKind::ExtraElevation,
        }
    }

    fn same_meaning(&self, other: &Rule) -> bool {
        self.id == other.id
            && self.subject_status == other.subject_status
            && self.subject_classes == other.subject_classes
            && self.antecedent == other.antecedent
            && self.consequent == other.consequent
    }
}

/// Priority-ordered rules bound to a taxonomy. Equal priorities order by id.
#[derive(Clone, Debug)]
pub struct RuleBase {
    rules: Vec<Rule>,
    taxonomy: Arc<Taxonomy>,
}

impl RuleBase {
    pub fn new(mut rules: Vec<Rule>, taxonomy: Arc<Taxonomy>) -> Result<Self> {
        let mut ids = std::collections::HashSet::new();
        for r in &rules {
            r.validate()?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::DuplicateRule(r.id.clone()));
            }
            if let Some(c) = r.subject_classes.iter().find(|c| !taxonomy.contains(*c)) {
                return Err(Error::Taxonomy(format!(
                    "rule `{}` uses class {c} outside the taxonomy",
                    r.id
                )));
            }
        }
        rules.sort_by(|a, b| a.priority.cmp(&b.priority).then_with(|| a.id.cmp(&b.id)));
        Ok(RuleBase { rules, taxonomy })
    }

    pub fn empty(taxonomy: Arc<Taxonomy>) -> Self {
        RuleBase {
            rules: Vec::new(),
            taxonomy,
        }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    fn filtered(&self, keep: impl Fn(RuleKind) -> bool) -> RuleBase {
        RuleBase {
            rules: self
                .rules
                .iter()
                .filter(|r| keep(r.kind()))
                .cloned()
                .collect(),
            taxonomy: self.taxonomy.clone(),
        }
    }

    /// Only the correction rules.
    pub fn intra(&self) -> RuleBase {
        self.filtered(|k| k == RuleKind::IntraCorrection)
    }

    /// Only the shadow and elevation rules.
    pub fn extra(&self) -> RuleBase {
        self.filtered(|k| k != RuleKind::IntraCorrection)
    }

    /// `self`'s rules followed by `other`'s, renumbered to keep that order.
    pub fn union(&self, other: &RuleBase) -> Result<RuleBase> {
        if self.taxonomy != other.taxonomy {
            return Err(Error::Taxonomy(
                "cannot merge rule bases over different taxonomies".into(),
            ));
        }
        let rules = self
            .rules
            .iter()
            .chain(&other.rules)
            .enumerate()
            .map(|(i, r)| Rule {
                priority: i as i64 + 1,
                ..r.clone()
            })
            .collect();
        RuleBase::new(rules, self.taxonomy.clone())
    }

    /// Same rules in the same evaluation order; absolute priority values are ignored.
    pub fn semantically_eq(&self, other: &RuleBase) -> bool {
        self.taxonomy == other.taxonomy
            && self.rules.len() == other.rules.len()
            && self
                .rules
                .iter()
                .zip(&other.rules)
                .all(|(a, b)| a.same_meaning(b))
    }

    /// Render in the rule DSL; rule order encodes priority.
    pub fn to_dsl(&self) -> String {
        dsl::serialize(self)
    }
}

/// One relabeled unit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub unit: usize,
    pub old: ClassId,
    pub new: ClassId,
    pub rule_id: String,
}

/// Record of every correction made in one reasoning pass, ordered by unit id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionLog {
    pub entries: Vec<Correction>,
}

impl CorrectionLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn for_unit(&self, unit: usize) -> Option<&Correction> {
        self.entries
            .binary_search_by_key(&unit, |c| c.unit)
            .ok()
            .map(|i| &self.entries[i])
    }
}
