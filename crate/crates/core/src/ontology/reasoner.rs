use std::collections::BTreeMap;

use super::{Antecedent, Consequent, Correction, CorrectionLog, Rule, RuleBase, RuleKind};
use crate::error::{Error, Result};
use crate::raster::{ExtraChannels, LabelMap};
use crate::spatial::{RegionGraph, UnitState};
use crate::superpixel::{InferenceUnit, UnitStatus};
use crate::taxonomy::{ClassId, ClassSet};

fn check_state<T>(
    units: &[InferenceUnit<T>],
    graph: &RegionGraph,
    snapshot: &[UnitState],
) -> Result<()> {
    if graph.len() != units.len() {
        return Err(Error::State(format!(
            "graph has {} units, unit list has {}",
            graph.len(),
            units.len()
        )));
    }
    if snapshot.len() != units.len() {
        return Err(Error::State(format!(
            "snapshot has {} entries for {} units",
            snapshot.len(),
            units.len()
        )));
    }
    Ok(())
}

fn check_kinds(rules: &RuleBase, want_intra: bool) -> Result<()> {
    match rules
        .rules()
        .iter()
        .find(|r| (r.kind() == RuleKind::IntraCorrection) != want_intra)
    {
        Some(r) => Err(Error::RuleKind {
            id: r.id.clone(),
            kind: r.kind().to_string(),
        }),
        None => Ok(()),
    }
}

fn subject_matches(rule: &Rule, state: UnitState) -> bool {
    rule.subject_status == state.status && rule.subject_classes.contains(state.class)
}

fn antecedent_holds(a: &Antecedent, unit: usize, graph: &RegionGraph, snap: &[UnitState]) -> bool {
    match a {
        Antecedent::SurroundedBy(set) => graph.is_surrounded_by(unit, set, snap),
        Antecedent::NoNeighborOf(set) => !graph.has_classified_neighbor_in(unit, set, snap),
        Antecedent::NeighborhoodContains(set) => graph.has_classified_neighbor_in(unit, set, snap),
        Antecedent::Unconditional => true,
    }
}

/// Largest-area class among Classified neighbors restricted to `within`.
fn max_class_within(
    graph: &RegionGraph,
    unit: usize,
    snap: &[UnitState],
    within: &ClassSet,
) -> Option<ClassId> {
    let mut area: BTreeMap<ClassId, usize> = BTreeMap::new();
    for nb in graph.neighbor_iter(unit) {
        let s = snap[nb];
        if s.is_classified() && within.contains(s.class) {
            *area.entry(s.class).or_insert(0) += graph.area(nb);
        }
    }
    let mut best: Option<(ClassId, usize)> = None;
    for (c, a) in area {
        if best.is_none_or(|(_, ba)| a > ba) {
            best = Some((c, a));
        }
    }
    best.map(|(c, _)| c)
}

/// New class proposed by the first firing correction rule, if any.
fn first_correction<'r>(
    rules: &'r RuleBase,
    unit: usize,
    graph: &RegionGraph,
    snap: &[UnitState],
) -> Option<(ClassId, &'r Rule)> {
    let state = snap[unit];
    for rule in rules.rules() {
        if !subject_matches(rule, state) || !antecedent_holds(&rule.antecedent, unit, graph, snap) {
            continue;
        }
        let target = match (rule.consequent, &rule.antecedent) {
            (Consequent::AdoptSurroundClass, Antecedent::SurroundedBy(allowed)) => {
                max_class_within(graph, unit, snap, allowed)
            }
            (Consequent::AdoptSurroundClass, _) | (Consequent::AdoptMaxClass, _) => {
                graph.max_class(unit, snap)
            }
            _ => None,
        };
        if let Some(c) = target {
            return Some((c, rule));
        }
    }
    None
}

/// Evaluate every correction rule against the pre-pass snapshot of `units`
/// without touching any label map. Units whose first firing rule keeps their
/// class produce no entry.
pub fn intra_corrections<T>(
    units: &[InferenceUnit<T>],
    graph: &RegionGraph,
    rules: &RuleBase,
) -> Result<CorrectionLog> {
    let order: Vec<usize> = (0..units.len()).collect();
    corrections_in_order(units, graph, rules, &order)
}

fn corrections_in_order<T>(
    units: &[InferenceUnit<T>],
    graph: &RegionGraph,
    rules: &RuleBase,
    order: &[usize],
) -> Result<CorrectionLog> {
    check_kinds(rules, true)?;
    let snap = crate::spatial::snapshot(units);
    check_state(units, graph, &snap)?;
    let mut seen = vec![false; units.len()];
    let mut entries = Vec::new();
    for &u in order {
        if u >= units.len() || std::mem::replace(&mut seen[u], true) {
            return Err(Error::State(format!(
                "unit order is not a permutation (unit {u})"
            )));
        }
        if let Some((new, rule)) = first_correction(rules, u, graph, &snap) {
            if new != snap[u].class {
                entries.push(Correction {
                    unit: u,
                    old: snap[u].class,
                    new,
                    rule_id: rule.id.clone(),
                });
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::State("unit order does not cover every unit".into()));
    }
    entries.sort_by_key(|c| c.unit);
    Ok(CorrectionLog { entries })
}

fn relabel<T>(
    units: &[InferenceUnit<T>],
    labels: &LabelMap,
    log: &CorrectionLog,
) -> Result<LabelMap> {
    if labels.len() != units.iter().map(|u| u.area()).sum::<usize>() {
        return Err(Error::Dimension(format!(
            "label map has {} pixels, units cover a different count",
            labels.len()
        )));
    }
    let mut out = labels.clone();
    for c in &log.entries {
        out.assign(&units[c.unit].pixels, c.new);
    }
    Ok(out)
}

/// One snapshot-semantics pass of the correction rules.
///
/// `labels` is the per-pixel map the units were built from; every pixel of a
/// corrected unit takes the unit's new class, all other pixels are copied.
pub fn apply_intra<T>(
    units: &[InferenceUnit<T>],
    graph: &RegionGraph,
    rules: &RuleBase,
    labels: &LabelMap,
) -> Result<(LabelMap, CorrectionLog)> {
    let log = intra_corrections(units, graph, rules)?;
    Ok((relabel(units, labels, &log)?, log))
}

/// [`apply_intra`] visiting units in an explicit order. The result does not
/// depend on the order; this entry point exists to demonstrate exactly that.
pub fn apply_intra_in_order<T>(
    units: &[InferenceUnit<T>],
    graph: &RegionGraph,
    rules: &RuleBase,
    labels: &LabelMap,
    order: &[usize],
) -> Result<(LabelMap, CorrectionLog)> {
    let log = corrections_in_order(units, graph, rules, order)?;
    Ok((relabel(units, labels, &log)?, log))
}

/// Unit states after a correction pass: relabeled units carry their new class
/// and count as Classified; all others keep their original state.
pub fn post_correction_snapshot<T>(
    units: &[InferenceUnit<T>],
    log: &CorrectionLog,
) -> Vec<UnitState> {
    let mut snap = crate::spatial::snapshot(units);
    for c in &log.entries {
        snap[c.unit] = UnitState {
            class: c.new,
            status: UnitStatus::Classified,
        };
    }
    snap
}

/// Shadow and elevation rasters from the extra-taxonomy rules.
///
/// Each unit takes the first firing shadow rule and, independently, the first
/// firing elevation rule. Units matched by neither get shadow 0 and elevation 0.
pub fn apply_extra<T>(
    units: &[InferenceUnit<T>],
    graph: &RegionGraph,
    rules: &RuleBase,
    snapshot: &[UnitState],
) -> Result<ExtraChannels> {
    check_kinds(rules, false)?;
    check_state(units, graph, snapshot)?;
    let (w, h) = (graph.width(), graph.height());
    let mut shadow = vec![0i8; w * h];
    let mut elevation = vec![0u8; w * h];
    for (u, unit) in units.iter().enumerate() {
        let state = snapshot[u];
        let fires = |r: &&Rule| {
            subject_matches(r, state) && antecedent_holds(&r.antecedent, u, graph, snapshot)
        };
        let mut s_val = None;
        let mut e_val = None;
        for rule in rules.rules().iter().filter(fires) {
            match rule.consequent {
                Consequent::AssertShadow(v) if s_val.is_none() => s_val = Some(v),
                Consequent::AssertElevation(v) if e_val.is_none() => e_val = Some(v),
                _ => {}
            }
            if s_val.is_some() && e_val.is_some() {
                break;
            }
        }
        for &p in &unit.pixels {
            shadow[p] = s_val.unwrap_or(0);
            elevation[p] = e_val.unwrap_or(0);
        }
    }
    ExtraChannels::new(w, h, shadow, elevation)
}
