//! Fixtures shared by the integration tests and the acceptance suite.
//!
//! Scenes are drawn as character grids over the eight land-cover classes:
//! `V G P B W A C S` mark confidently predicted pixels, lower-case letters
//! mark low-confidence ones. Each 4-connected run of one character becomes a
//! superpixel.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cbf_core::classifier::ClassifierParams;
use cbf_core::raster::{ConfidenceMap, ProbMap, RasterImage};
use cbf_core::spatial::snapshot;
use cbf_core::superpixel::InferenceUnit;
use cbf_core::{
    aggregate_units, argmax_labels, build_graph, ClassId, LabelMap, RegionGraph, SuperpixelMap,
    Taxonomy, UnitStatus,
};

pub const F_T: f64 = 0.7;
pub const SURE: f64 = 0.9;
pub const UNSURE: f64 = 0.45;
const LETTERS: &str = "VGPBWACS";

pub fn ucm() -> Arc<Taxonomy> {
    Arc::new(Taxonomy::ucm())
}

pub fn class_of(ch: char) -> ClassId {
    let i = LETTERS
        .find(ch.to_ascii_uppercase())
        .unwrap_or_else(|| panic!("unknown class letter {ch}"));
    ClassId(i as u8)
}

pub struct Built {
    pub width: usize,
    pub height: usize,
    pub chars: Vec<char>,
    pub probs: ProbMap<f64>,
    pub spmap: SuperpixelMap,
    pub stage1: LabelMap,
    pub confidence: ConfidenceMap<f64>,
    pub units: Vec<InferenceUnit<f64>>,
    pub graph: RegionGraph,
}

/// Probability map with `conf` on the given class and the rest spread evenly.
pub fn probs_from(
    classes: &[ClassId],
    confs: &[f64],
    w: usize,
    h: usize,
    n: usize,
) -> ProbMap<f64> {
    let mut data = Vec::with_capacity(w * h * n);
    for (c, &p) in classes.iter().zip(confs) {
        let rest = (1.0 - p) / (n - 1) as f64;
        data.extend((0..n).map(|k| if k == c.index() { p } else { rest }));
    }
    ProbMap::new(w, h, n, data).unwrap()
}

/// Dense ids for 4-connected runs of equal keys, numbered in raster order.
pub fn runs<K: PartialEq>(keys: &[K], w: usize, h: usize) -> Vec<u32> {
    let mut id = vec![u32::MAX; w * h];
    let mut next = 0;
    for start in 0..w * h {
        if id[start] != u32::MAX {
            continue;
        }
        id[start] = next;
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            let mut nbrs = Vec::with_capacity(4);
            if x > 0 {
                nbrs.push(p - 1);
            }
            if x + 1 < w {
                nbrs.push(p + 1);
            }
            if y > 0 {
                nbrs.push(p - w);
            }
            if y + 1 < h {
                nbrs.push(p + w);
            }
            for q in nbrs {
                if id[q] == u32::MAX && keys[q] == keys[start] {
                    id[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    id
}

pub fn build(grid: &[&str]) -> Built {
    let h = grid.len();
    let w = grid[0].chars().count();
    let chars: Vec<char> = grid.iter().flat_map(|r| r.chars()).collect();
    assert_eq!(chars.len(), w * h, "ragged grid");
    let tax = ucm();
    let classes: Vec<ClassId> = chars.iter().map(|&c| class_of(c)).collect();
    let confs: Vec<f64> = chars
        .iter()
        .map(|c| if c.is_uppercase() { SURE } else { UNSURE })
        .collect();
    let probs = probs_from(&classes, &confs, w, h, tax.len());
    let spmap = SuperpixelMap::new(w, h, runs(&chars, w, h)).unwrap();
    let (stage1, confidence) = argmax_labels(&probs, tax).unwrap();
    let units = aggregate_units(&spmap, &stage1, &confidence, F_T).unwrap();
    let graph = build_graph(&units, w, h).unwrap();
    Built {
        width: w,
        height: h,
        chars,
        probs,
        spmap,
        stage1,
        confidence,
        units,
        graph,
    }
}

pub struct GoldenIntra {
    pub rule: &'static str,
    pub grid: &'static [&'static str],
    /// Class the low-confidence hole must take.
    pub restored: char,
}

pub const GOLDEN_INTRA: &[GoldenIntra] = &[
    GoldenIntra {
        rule: "r1",
        grid: &["GGGGGG", "GGGGGG", "GGvvGG", "GGvvGG", "GGGGGG", "GGGGGG"],
        restored: 'G',
    },
    GoldenIntra {
        rule: "r2",
        grid: &["PPPPPP", "PPPPPP", "PPggPP", "PPggPP", "PPPPPP", "PPPPPP"],
        restored: 'P',
    },
    GoldenIntra {
        rule: "r3",
        grid: &["WWWWWW", "WWWWWW", "WWbbWW", "WWbbWW", "WWWWWW", "WWWWWW"],
        restored: 'W',
    },
    GoldenIntra {
        rule: "r4",
        grid: &["VVVVVV", "VVVVVV", "VVwwVV", "VVwwVV", "VVVVVV", "VVVVVV"],
        restored: 'V',
    },
    GoldenIntra {
        rule: "r5",
        grid: &["BBBBBB", "BBBBBB", "BBaaBB", "BBaaBB", "BBBBBB", "BBBBBB"],
        restored: 'B',
    },
    GoldenIntra {
        rule: "r6",
        grid: &["WWWWWW", "WWWWWW", "WWccWW", "WWccWW", "WWWWWW", "WWWWWW"],
        restored: 'W',
    },
    GoldenIntra {
        rule: "r7",
        grid: &["GGGGGG", "GGGGGG", "GGaaGG", "GGaaGG", "GGGGGG", "GGGGGG"],
        restored: 'G',
    },
    GoldenIntra {
        rule: "r8",
        grid: &["GGGGGG", "GGGGGG", "GGccGG", "GGccGG", "GGGGGG", "GGGGGG"],
        restored: 'G',
    },
    GoldenIntra {
        rule: "r9",
        grid: &["GGGGGG", "GGGGGG", "GGssGG", "GGssGG", "GGGGGG", "GGGGGG"],
        restored: 'G',
    },
];

pub struct GoldenExtra {
    pub rule: &'static str,
    pub grid: &'static [&'static str],
    /// `+`, `0` or `-` per pixel.
    pub shadow: &'static [&'static str],
    /// `0`, `1` or `2` per pixel.
    pub elevation: &'static [&'static str],
}

pub const GOLDEN_EXTRA: &[GoldenExtra] = &[
    // A dark low-confidence strip beside a building reads as shadow.
    GoldenExtra {
        rule: "e1",
        grid: &["GGGGGG", "GBBGGG", "GBBwwG", "GGGwwG", "GGGGGG"],
        shadow: &["000000", "0--000", "0--++0", "000++0", "000000"],
        elevation: &["000000", "022000", "022000", "000000", "000000"],
    },
    GoldenExtra {
        rule: "e2",
        grid: &["PPPPP", "PvvAP", "PvvAP", "PPPPP"],
        shadow: &["00000", "0--00", "0--00", "00000"],
        elevation: &["00000", "00010", "00010", "00000"],
    },
    GoldenExtra {
        rule: "e3",
        grid: &["GGGGG", "GGGGG", "PPPPP", "PPPPP"],
        shadow: &["-----", "-----", "00000", "00000"],
        elevation: &["00000", "00000", "00000", "00000"],
    },
    GoldenExtra {
        rule: "e4",
        grid: &["PPPPP", "PBBBP", "PBBBP", "PPPPP"],
        shadow: &["00000", "0---0", "0---0", "00000"],
        elevation: &["00000", "02220", "02220", "00000"],
    },
    GoldenExtra {
        rule: "e5",
        grid: &["VVPPP", "VVPPP", "WWWCC", "WWWCC"],
        shadow: &["00000", "00000", "00000", "00000"],
        elevation: &["00000", "00000", "00011", "00011"],
    },
    GoldenExtra {
        rule: "e6",
        grid: &["PPPPP", "PCCPP", "PPPAA", "WSSAA"],
        shadow: &["00000", "00000", "00000", "00000"],
        elevation: &["00000", "01100", "00011", "01111"],
    },
    GoldenExtra {
        rule: "e7",
        grid: &["WWWW", "WBBW", "WBBW", "WWWW"],
        shadow: &["0000", "0--0", "0--0", "0000"],
        elevation: &["0000", "0220", "0220", "0000"],
    },
];

pub fn parse_shadow(rows: &[&str]) -> Vec<i8> {
    rows.iter()
        .flat_map(|r| r.chars())
        .map(|c| match c {
            '+' => 1,
            '-' => -1,
            '0' => 0,
            _ => panic!("bad shadow char {c}"),
        })
        .collect()
}

pub fn parse_elevation(rows: &[&str]) -> Vec<u8> {
    rows.iter()
        .flat_map(|r| r.chars())
        .map(|c| c.to_digit(10).expect("elevation digit") as u8)
        .collect()
}

/// Independent evaluation of the built-in correction rules on one unit,
/// written directly from the rule table: returns `(rule id, new class)` of
/// the first rule whose condition holds.
pub fn hand_reason(
    units: &[InferenceUnit<f64>],
    graph: &RegionGraph,
    unit: usize,
) -> Option<(&'static str, ClassId)> {
    let u = &units[unit];
    if u.status != UnitStatus::MisClassified {
        return None;
    }
    let snap = snapshot(units);
    let mut area: BTreeMap<u8, usize> = BTreeMap::new();
    for nb in graph.neighbors(unit).unwrap() {
        if snap[nb].status == UnitStatus::Classified {
            *area.entry(snap[nb].class.0).or_insert(0) += units[nb].pixels.len();
        }
    }
    let present: BTreeSet<u8> = area.keys().copied().collect();
    let dominant = |within: &[u8]| -> Option<ClassId> {
        let mut best: Option<(u8, usize)> = None;
        for (&c, &a) in &area {
            if within.contains(&c) && best.is_none_or(|(_, b)| a > b) {
                best = Some((c, a));
            }
        }
        best.map(|(c, _)| ClassId(c))
    };
    let all: Vec<u8> = (0..8).collect();
    let surrounded =
        |allowed: &[u8]| !present.is_empty() && present.iter().all(|c| allowed.contains(c));
    let lacks = |c: u8| !present.contains(&c);
    const V: u8 = 0;
    const G: u8 = 1;
    const P: u8 = 2;
    const B: u8 = 3;
    const W: u8 = 4;
    const A: u8 = 5;
    const C: u8 = 6;
    const S: u8 = 7;
    let hole_rules: [(&str, u8, &[u8]); 6] = [
        ("r1", V, &[G, P, B, W]),
        ("r2", G, &[P, B, W]),
        ("r3", B, &[G, W]),
        ("r4", W, &[V, B, P]),
        ("r5", A, &[V, B, W]),
        ("r6", C, &[V, W]),
    ];
    for (id, subject, allowed) in hole_rules {
        if u.class.0 == subject && surrounded(allowed) {
            return dominant(allowed).map(|c| (id, c));
        }
    }
    let context_rules: [(&str, u8, u8); 3] = [("r7", A, P), ("r8", C, P), ("r9", S, W)];
    for (id, subject, carrier) in context_rules {
        if u.class.0 == subject && lacks(carrier) {
            if let Some(c) = dominant(&all) {
                return Some((id, c));
            }
        }
    }
    None
}

/// Piecewise-smooth RGB image: a few discs and half-planes, each with its
/// own linear color ramp, over a smooth background, plus mild noise.
pub fn piecewise_smooth(w: usize, h: usize, seed: u64) -> RasterImage<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let piece = |rng: &mut ChaCha8Rng| {
        let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
        let slope: [f64; 2] = std::array::from_fn(|_| rng.random_range(-0.002..0.002));
        (base, slope)
    };
    let background = piece(&mut rng);
    let mut shapes = Vec::new();
    for _ in 0..rng.random_range(3..9) {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let r = rng.random_range(8.0..40.0);
        let disc = rng.random_bool(0.6);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        shapes.push((cx, cy, r, disc, angle, piece(&mut rng)));
    }
    let noise: Vec<f64> = (0..w * h * 3)
        .map(|_| rng.random_range(-0.02..0.02))
        .collect();
    RasterImage::from_fn(w, h, 3, |x, y, c| {
        let (fx, fy) = (x as f64, y as f64);
        let mut color = background;
        for &(cx, cy, r, disc, angle, p) in &shapes {
            let inside = if disc {
                (fx - cx).hypot(fy - cy) < r
            } else {
                (fx - cx) * angle.cos() + (fy - cy) * angle.sin() > 0.0
            };
            if inside {
                color = p;
            }
        }
        let (base, slope) = color;
        let v = base[c] + slope[0] * fx + slope[1] * fy + noise[(y * w + x) * 3 + c];
        v.clamp(0.0, 1.0)
    })
    .unwrap()
}

/// Cross-entropy written out from the parameter layout alone: optional tanh
/// layer (`dim × width` row-major), then softmax over `input × n` weights.
pub fn reference_loss(p: &ClassifierParams<f64>, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
    let n = p.n_classes;
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let input: Vec<f64> = match &p.hidden {
            Some(hl) => (0..hl.width)
                .map(|j| {
                    (hl.bias[j]
                        + (0..x.len())
                            .map(|i| x[i] * hl.weights[i * hl.width + j])
                            .sum::<f64>())
                    .tanh()
                })
                .collect(),
            None => x.clone(),
        };
        let z: Vec<f64> = (0..n)
            .map(|k| {
                p.bias[k]
                    + (0..input.len())
                        .map(|i| input[i] * p.weights[i * n + k])
                        .sum::<f64>()
            })
            .collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    total
}

pub type Q = Ratio<i64>;

/// Pixel-by-pixel oracle: OA and mIOU as exact fractions, with per-class
/// intersection and union counted directly from the two rasters.
pub fn metric_oracle(pred: &[u8], truth: &[u8], n: usize) -> (Q, Q) {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count() as i64;
    let oa = Q::new(hits, pred.len() as i64);
    let mut sum = Q::from_integer(0);
    let mut present = 0;
    for c in 0..n as u8 {
        let inter = pred
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == c && t == c)
            .count() as i64;
        let union = pred
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == c || t == c)
            .count() as i64;
        if union > 0 {
            sum += Q::new(inter, union);
            present += 1;
        }
    }
    (oa, sum / Q::from_integer(present))
}
