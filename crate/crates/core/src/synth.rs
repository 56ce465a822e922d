//! Deterministic synthetic scenes and probability-map corruption.
//!
//! A [`SceneSpec`] lists classes with mean colors and an ordered shape
//! inventory. Shapes are painted in order onto a background class; a shape
//! may require that its footprint (grown by `margin`) lands entirely on one
//! class, which is how cars end up on pavement and ships on water. Shapes
//! flagged `shadow` cast a strip of `shadow.color` on the pixels behind them
//! along `(dx, dy)`; the strip keeps its underlying class.
//!
//! Specs are TOML; [`SceneSpec::default_benchmark`] is the reference layout.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{LabelMap, ProbMap, RasterImage};
use crate::taxonomy::{ClassId, ElevationBand, Taxonomy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub band: ElevationBand,
    pub color: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Rect,
    Ellipse,
    /// Full-length horizontal or vertical band; `size` is its width.
    Road,
}

/// Render a shape's pixels with its class color blended toward another class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tint {
    pub toward: String,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub class: String,
    /// Inclusive range of instances per scene.
    pub count: [usize; 2],
    /// Inclusive range of each side (rect), diameter (ellipse) or width (road).
    pub size: [usize; 2],
    #[serde(default)]
    pub on: Option<String>,
    #[serde(default)]
    pub margin: usize,
    #[serde(default)]
    pub tint: Option<Tint>,
    #[serde(default)]
    pub shadow: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowSpec {
    pub dx: i32,
    pub dy: i32,
    pub length: usize,
    pub color: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub background: String,
    pub noise_sigma: f64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub shapes: Vec<ShapeSpec>,
    #[serde(default)]
    pub shadow: Option<ShadowSpec>,
}

fn default_retries() -> usize {
    50
}

/// One painted shape instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub shape: usize,
    pub class: ClassId,
    pub pixels: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub image: RasterImage<f64>,
    pub labels: LabelMap,
    /// Pixels rendered in shadow color.
    pub shadow_mask: Vec<bool>,
    pub placements: Vec<Placement>,
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        Taxonomy::new(self.classes.iter().map(|c| (c.name.clone(), c.band)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.width == 0 || self.height == 0 {
            return bad("scene dimensions must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise sigma {} must be non-negative",
                self.noise_sigma
            ));
        }
        let tax = self.taxonomy()?;
        if tax.id_of(&self.background).is_none() {
            return bad(format!(
                "background class `{}` is not declared",
                self.background
            ));
        }
        let in_unit = |c: &[f64; 3]| c.iter().all(|v| (0.0..=1.0).contains(v));
        for (i, a) in self.classes.iter().enumerate() {
            if !in_unit(&a.color) {
                return bad(format!("color of `{}` outside [0,1]", a.name));
            }
            for b in &self.classes[i + 1..] {
                let d = a
                    .color
                    .iter()
                    .zip(&b.color)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d < 3.0 * self.noise_sigma {
                    return bad(format!(
                        "colors of `{}` and `{}` are {d:.3} apart, less than 3 sigma",
                        a.name, b.name
                    ));
                }
            }
        }
        for s in &self.shapes {
            for name in std::iter::once(&s.class)
                .chain(s.on.as_ref())
                .chain(s.tint.as_ref().map(|t| &t.toward))
            {
                if tax.id_of(name).is_none() {
                    return bad(format!("shape refers to unknown class `{name}`"));
                }
            }
            if s.count[0] > s.count[1] || s.size[0] > s.size[1] || s.size[0] == 0 {
                return bad(format!(
                    "shape `{}` has an empty count or size range",
                    s.class
                ));
            }
            if let Some(t) = &s.tint {
                if !(0.0..=1.0).contains(&t.amount) {
                    return bad("tint amount must lie in [0,1]".into());
                }
            }
        }
        if let Some(sh) = &self.shadow {
            if !in_unit(&sh.color) || (sh.dx == 0 && sh.dy == 0) {
                return bad("shadow needs a unit color and a non-zero direction".into());
            }
        }
        Ok(())
    }

    /// 96×96 scenes over the eight land-cover classes: roads, a paved apron
    /// with an airplane, a pond with ships, trees, buildings casting
    /// south-east shadows, cars on pavement, and tinted patches (dry soil,
    /// puddles, dirt) that keep their host class.
    pub fn default_benchmark(seed: u64) -> Self {
        use ElevationBand::*;
        let class = |name: &str, band, color| ClassSpec {
            name: name.into(),
            band,
            color,
        };
        let shape = |kind, class: &str, count, size, on: Option<&str>, margin| ShapeSpec {
            kind,
            class: class.into(),
            count,
            size,
            on: on.map(Into::into),
            margin,
            tint: None,
            shadow: false,
        };
        let tinted = |class: &str, toward: &str, amount| ShapeSpec {
            tint: Some(Tint {
                toward: toward.into(),
                amount,
            }),
            ..shape(ShapeKind::Ellipse, class, [2, 4], [5, 9], Some(class), 2)
        };
        SceneSpec {
            width: 96,
            height: 96,
            seed,
            background: "Ground".into(),
            noise_sigma: 0.05,
            max_retries: default_retries(),
            classes: vec![
                class("Vegetation", Low, [0.20, 0.50, 0.20]),
                class("Ground", Low, [0.62, 0.52, 0.36]),
                class("Pavement", Low, [0.50, 0.50, 0.52]),
                class("Building", High, [0.78, 0.30, 0.25]),
                class("Water", Low, [0.14, 0.24, 0.46]),
                class("Airplane", Medium, [0.93, 0.93, 0.96]),
                class("Car", Medium, [0.95, 0.80, 0.10]),
                class("Ship", Medium, [0.72, 0.42, 0.70]),
            ],
            shapes: vec![
                shape(ShapeKind::Road, "Pavement", [1, 2], [10, 14], None, 0),
                shape(
                    ShapeKind::Ellipse,
                    "Water",
                    [1, 1],
                    [20, 28],
                    Some("Ground"),
                    3,
                ),
                shape(
                    ShapeKind::Rect,
                    "Pavement",
                    [1, 1],
                    [22, 28],
                    Some("Ground"),
                    2,
                ),
                shape(
                    ShapeKind::Rect,
                    "Airplane",
                    [1, 1],
                    [7, 10],
                    Some("Pavement"),
                    2,
                ),
                ShapeSpec {
                    shadow: true,
                    ..shape(
                        ShapeKind::Rect,
                        "Building",
                        [2, 4],
                        [10, 14],
                        Some("Ground"),
                        3,
                    )
                },
                shape(
                    ShapeKind::Ellipse,
                    "Vegetation",
                    [2, 3],
                    [10, 18],
                    Some("Ground"),
                    1,
                ),
                shape(ShapeKind::Rect, "Car", [2, 5], [3, 5], Some("Pavement"), 1),
                shape(ShapeKind::Ellipse, "Ship", [1, 2], [4, 7], Some("Water"), 2),
                tinted("Ground", "Vegetation", 0.55),
                tinted("Pavement", "Water", 0.55),
                tinted("Pavement", "Ground", 0.55),
            ],
            shadow: Some(ShadowSpec {
                dx: 1,
                dy: 1,
                length: 5,
                color: [0.14, 0.24, 0.46],
            }),
        }
    }
}

fn footprint(kind: ShapeKind, x0: usize, y0: usize, sw: usize, sh: usize, w: usize) -> Vec<usize> {
    let mut px = Vec::with_capacity(sw * sh);
    for y in y0..y0 + sh {
        for x in x0..x0 + sw {
            let inside = match kind {
                ShapeKind::Rect | ShapeKind::Road => true,
                ShapeKind::Ellipse => {
                    let (rx, ry) = (sw as f64 / 2.0, sh as f64 / 2.0);
                    let (cx, cy) = (
                        x as f64 + 0.5 - x0 as f64 - rx,
                        y as f64 + 0.5 - y0 as f64 - ry,
                    );
                    (cx / rx).powi(2) + (cy / ry).powi(2) <= 1.0
                }
            };
            if inside {
                px.push(y * w + x);
            }
        }
    }
    px
}

fn shadow_strip(
    pixels: &[usize],
    in_shape: &[bool],
    sh: &ShadowSpec,
    w: usize,
    h: usize,
) -> Vec<usize> {
    let mut strip = Vec::new();
    let mut seen = vec![false; w * h];
    for &p in pixels {
        let (x, y) = ((p % w) as i64, (p / w) as i64);
        for k in 1..=sh.length as i64 {
            let (sx, sy) = (x + k * sh.dx as i64, y + k * sh.dy as i64);
            if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
                break;
            }
            let q = sy as usize * w + sx as usize;
            if !in_shape[q] && !seen[q] {
                seen[q] = true;
                strip.push(q);
            }
        }
    }
    strip.sort_unstable();
    strip
}

/// Pixels within Chebyshev distance `margin` of the footprint, inside the image.
fn grown(pixels: &[usize], margin: usize, w: usize, h: usize) -> Vec<usize> {
    if margin == 0 {
        return pixels.to_vec();
    }
    let mut mark = vec![false; w * h];
    let m = margin as i64;
    for &p in pixels {
        let (x, y) = ((p % w) as i64, (p / w) as i64);
        for yy in (y - m).max(0)..=(y + m).min(h as i64 - 1) {
            for xx in (x - m).max(0)..=(x + m).min(w as i64 - 1) {
                mark[yy as usize * w + xx as usize] = true;
            }
        }
    }
    mark.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect()
}

/// Top-left corners where a `sw × sh` box, grown by `margin` and stretched
/// `len` steps along `(dx, dy)`, covers only class `on` (clipped to the image).
#[allow(clippy::too_many_arguments)]
fn positions_on(
    free: &[bool],
    w: usize,
    h: usize,
    sw: usize,
    sh: usize,
    margin: usize,
    (dx, dy, len): (i32, i32, usize),
) -> Vec<(usize, usize)> {
    // Summed-area table of pixels that are not free.
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            let v = u32::from(!free[y * w + x]);
            sat[(y + 1) * (w + 1) + x + 1] =
                v + sat[y * (w + 1) + x + 1] + sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
        }
    }
    let ext = |d: i32, neg: bool| -> i64 {
        let d = if neg { -d } else { d };
        i64::from(d.max(0)) * len as i64
    };
    let (m, w_i, h_i) = (margin as i64, w as i64, h as i64);
    let mut out = Vec::new();
    for y0 in 0..=h - sh {
        for x0 in 0..=w - sw {
            let xa = (x0 as i64 - m - ext(dx, true)).max(0) as usize;
            let xb = (x0 as i64 + sw as i64 + m + ext(dx, false)).min(w_i) as usize;
            let ya = (y0 as i64 - m - ext(dy, true)).max(0) as usize;
            let yb = (y0 as i64 + sh as i64 + m + ext(dy, false)).min(h_i) as usize;
            let bad = sat[yb * (w + 1) + xb] + sat[ya * (w + 1) + xa]
                - sat[ya * (w + 1) + xb]
                - sat[yb * (w + 1) + xa];
            if bad == 0 {
                out.push((x0, y0));
            }
        }
    }
    out
}

/// Render a scene. Deterministic in `spec` (including its seed).
pub fn render_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let taxonomy = Arc::new(spec.taxonomy()?);
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = taxonomy.id_of(&spec.background).unwrap();
    let mut labels = vec![bg; w * h];
    // Per-pixel mean color; starts at the background color.
    let class_color = |c: ClassId| spec.classes[c.index()].color;
    let mut color = vec![class_color(bg); w * h];
    let mut shadow_mask = vec![false; w * h];
    let mut placements = Vec::new();

    for (si, s) in spec.shapes.iter().enumerate() {
        let cls = taxonomy.id_of(&s.class).unwrap();
        let on = s.on.as_ref().map(|n| taxonomy.id_of(n).unwrap());
        let want = rng.random_range(s.count[0]..=s.count[1]);
        let mut placed = 0;
        let mut attempts = 0;
        while placed < want {
            if attempts >= spec.max_retries {
                if placed >= s.count[0] {
                    break;
                }
                return Err(Error::Infeasible(format!(
                    "could only place {placed} of at least {} `{}` shapes",
                    s.count[0], s.class
                )));
            }
            attempts += 1;
            let (sw, sh, x0, y0) = match s.kind {
                ShapeKind::Road => {
                    let thick = rng.random_range(s.size[0]..=s.size[1]);
                    if rng.random_bool(0.5) {
                        if thick > h {
                            continue;
                        }
                        (w, thick, 0, rng.random_range(0..=h - thick))
                    } else {
                        if thick > w {
                            continue;
                        }
                        (thick, h, rng.random_range(0..=w - thick), 0)
                    }
                }
                _ => {
                    let sw = rng.random_range(s.size[0]..=s.size[1]);
                    let sh = rng.random_range(s.size[0]..=s.size[1]);
                    if sw > w || sh > h {
                        continue;
                    }
                    match on {
                        None => (
                            sw,
                            sh,
                            rng.random_range(0..=w - sw),
                            rng.random_range(0..=h - sh),
                        ),
                        Some(on) => {
                            let reach = match (&spec.shadow, s.shadow) {
                                (Some(sd), true) => (sd.dx, sd.dy, sd.length),
                                _ => (0, 0, 0),
                            };
                            let free: Vec<bool> = labels
                                .iter()
                                .zip(&shadow_mask)
                                .map(|(&l, &sm)| l == on && !sm)
                                .collect();
                            let fits = positions_on(&free, w, h, sw, sh, s.margin, reach);
                            if fits.is_empty() {
                                continue;
                            }
                            let (x0, y0) = fits[rng.random_range(0..fits.len())];
                            (sw, sh, x0, y0)
                        }
                    }
                }
            };
            let pixels = footprint(s.kind, x0, y0, sw, sh, w);
            let mut in_shape = vec![false; w * h];
            for &p in &pixels {
                in_shape[p] = true;
            }
            let strip = match (&spec.shadow, s.shadow) {
                (Some(sd), true) => shadow_strip(&pixels, &in_shape, sd, w, h),
                _ => Vec::new(),
            };
            if let Some(on) = on {
                let ok = grown(&pixels, s.margin, w, h)
                    .into_iter()
                    .chain(strip.iter().copied())
                    .all(|p| labels[p] == on && !shadow_mask[p]);
                if !ok {
                    continue;
                }
            }
            let base = class_color(cls);
            let fill = match &s.tint {
                Some(t) => {
                    let other = class_color(taxonomy.id_of(&t.toward).unwrap());
                    std::array::from_fn(|c| base[c] * (1.0 - t.amount) + other[c] * t.amount)
                }
                None => base,
            };
            for &p in &pixels {
                labels[p] = cls;
                color[p] = fill;
                shadow_mask[p] = false;
            }
            if let Some(sd) = &spec.shadow {
                for &p in &strip {
                    color[p] = sd.color;
                    shadow_mask[p] = true;
                }
            }
            placements.push(Placement {
                shape: si,
                class: cls,
                pixels,
            });
            placed += 1;
        }
    }

    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut data = Vec::with_capacity(w * h * 3);
    for c in &color {
        for &v in c {
            let n = if spec.noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            data.push((v + n).clamp(0.0, 1.0));
        }
    }
    Ok(Scene {
        image: RasterImage::new(w, h, 3, data)?,
        labels: LabelMap::new(w, h, labels, taxonomy)?,
        shadow_mask,
        placements,
    })
}

/// Image and ground truth of a scene.
pub fn generate_scene(spec: &SceneSpec) -> Result<(RasterImage<f64>, LabelMap)> {
    let s = render_scene(spec)?;
    Ok((s.image, s.labels))
}

/// `n` scenes sharing the layout of `template`, each rendered with its own
/// seed drawn from a stream keyed by `seed`. Seeds whose layout cannot be
/// placed are skipped; the stream is deterministic, so the result is too.
pub fn render_scenes(template: &SceneSpec, n: usize, seed: u64) -> Result<Vec<Scene>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenes = Vec::with_capacity(n);
    let mut skipped = 0;
    while scenes.len() < n {
        let spec = SceneSpec {
            seed: rng.random(),
            ..template.clone()
        };
        match render_scene(&spec) {
            Ok(s) => scenes.push(s),
            Err(Error::Infeasible(msg)) => {
                skipped += 1;
                if skipped > 10 * n + 100 {
                    return Err(Error::Infeasible(format!(
                        "{msg} (after {skipped} layouts)"
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(scenes)
}

/// `n` scenes of the default benchmark layout.
pub fn default_benchmark(n: usize, seed: u64) -> Result<Vec<Scene>> {
    render_scenes(&SceneSpec::default_benchmark(0), n, seed)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

const SPLIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Seeded 60/20/20 split of `0..n`; each part is sorted.
pub fn split_indices(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT));
    let n_train = (n * 3).div_ceil(5);
    let n_val = (n - n_train).div_ceil(2);
    let part = |r: std::ops::Range<usize>| {
        let mut v = idx[r].to_vec();
        v.sort_unstable();
        v
    };
    Split {
        train: part(0..n_train),
        val: part(n_train..n_train + n_val),
        test: part(n_train + n_val..n),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionModel {
    /// Fraction of eligible hole sites that are corrupted.
    pub hole_rate: f64,
    /// `(true class, wrong class)` name pairs; a site's wrong class is drawn
    /// from the pairs of its host class.
    pub confusion_pairs: Vec<(String, String)>,
    pub corrupted_confidence: f64,
    pub clean_confidence: f64,
    /// Inclusive hole radius range in pixels.
    pub radius: [usize; 2],
    /// Ring around each hole that must share the hole's true class.
    pub margin: usize,
    /// Spacing of the candidate site grid.
    pub spacing: usize,
    pub seed: u64,
}

impl Default for CorruptionModel {
    fn default() -> Self {
        let pairs = [
            ("Ground", "Vegetation"),
            ("Ground", "Building"),
            ("Ground", "Airplane"),
            ("Ground", "Car"),
            ("Ground", "Ship"),
            ("Pavement", "Ground"),
            ("Pavement", "Water"),
            ("Water", "Ground"),
            ("Water", "Building"),
            ("Vegetation", "Water"),
            ("Vegetation", "Ship"),
            ("Building", "Water"),
            ("Building", "Car"),
        ];
        CorruptionModel {
            hole_rate: 0.5,
            confusion_pairs: pairs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            corrupted_confidence: 0.45,
            clean_confidence: 0.9,
            radius: [3, 4],
            margin: 2,
            spacing: 12,
            seed: 0,
        }
    }
}

impl CorruptionModel {
    /// The model for scene `index` of a benchmark: same settings, own seed.
    pub fn for_scene(&self, index: usize) -> CorruptionModel {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        CorruptionModel {
            seed: rng.random(),
            ..self.clone()
        }
    }
}

/// One injected error.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptedRegion {
    pub pixels: Vec<usize>,
    pub truth: ClassId,
    pub wrong: ClassId,
}

/// Confidence threshold the default profile is built around.
pub const DEFAULT_F_T: f64 = 0.7;

impl CorruptionModel {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if !(0.0..=1.0).contains(&self.hole_rate) {
            return bad("hole rate must lie in [0,1]");
        }
        let (c, k) = (self.corrupted_confidence, self.clean_confidence);
        if !(c > 0.0 && c < DEFAULT_F_T && k > DEFAULT_F_T && k <= 1.0) {
            return bad("corrupted confidence must lie below 0.7 and clean confidence above it");
        }
        if n_classes >= 2 && (1.0 - c) / (n_classes as f64 - 1.0) >= c {
            return bad("corrupted confidence does not dominate the remaining classes");
        }
        if self.radius[0] > self.radius[1] || self.spacing == 0 {
            return bad("empty radius range or zero spacing");
        }
        Ok(())
    }

    fn pairs(&self, taxonomy: &Taxonomy) -> Result<Vec<(ClassId, ClassId)>> {
        self.confusion_pairs
            .iter()
            .map(|(a, b)| match (taxonomy.id_of(a), taxonomy.id_of(b)) {
                (Some(x), Some(y)) if x != y => Ok((x, y)),
                _ => Err(Error::Parameter(format!(
                    "confusion pair {a}->{b} is not usable"
                ))),
            })
            .collect()
    }
}

/// Choose the hole sites the model would corrupt in `truth`.
///
/// Candidate centers lie on a jittered grid. A site is eligible when its disk
/// plus margin fits inside the image, is a single class, and that class has a
/// confusion pair. Eligible sites are shuffled and the first
/// `round(hole_rate * count)` kept.
pub fn plan_corruption(truth: &LabelMap, model: &CorruptionModel) -> Result<Vec<CorruptedRegion>> {
    let taxonomy = truth.taxonomy();
    model.validate(taxonomy.len())?;
    let pairs = model.pairs(taxonomy)?;
    let (w, h) = (truth.width() as i64, truth.height() as i64);
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let step = model.spacing as i64;
    let (ox, oy) = (rng.random_range(0..step), rng.random_range(0..step));
    let mut sites = Vec::new();
    let mut cy = oy;
    while cy < h {
        let mut cx = ox;
        while cx < w {
            let r = rng.random_range(model.radius[0]..=model.radius[1]) as i64;
            let outer = r + model.margin as i64;
            if cx - outer >= 0 && cy - outer >= 0 && cx + outer < w && cy + outer < h {
                let host = truth.at(cx as usize, cy as usize);
                let mut uniform = true;
                let mut disk = Vec::new();
                'scan: for y in cy - outer..=cy + outer {
                    for x in cx - outer..=cx + outer {
                        if truth.at(x as usize, y as usize) != host {
                            uniform = false;
                            break 'scan;
                        }
                        let (dx, dy) = (x - cx, y - cy);
                        if dx * dx + dy * dy <= r * r {
                            disk.push((y * w + x) as usize);
                        }
                    }
                }
                let options: Vec<ClassId> = pairs
                    .iter()
                    .filter(|(t, _)| *t == host)
                    .map(|(_, wr)| *wr)
                    .collect();
                if uniform && !options.is_empty() {
                    let wrong = options[rng.random_range(0..options.len())];
                    sites.push(CorruptedRegion {
                        pixels: disk,
                        truth: host,
                        wrong,
                    });
                }
            }
            cx += step;
        }
        cy += step;
    }
    sites.shuffle(&mut rng);
    let keep = (model.hole_rate * sites.len() as f64).round() as usize;
    sites.truncate(keep);
    sites.sort_by_key(|s| s.pixels[0]);
    Ok(sites)
}

/// Soft prediction that agrees with `truth` except on the planned holes.
pub fn corrupt_probmap(truth: &LabelMap, model: &CorruptionModel) -> Result<ProbMap<f64>> {
    let regions = plan_corruption(truth, model)?;
    Ok(corrupt_with(truth, model, &regions))
}

/// Build the probability map for already planned regions.
pub fn corrupt_with(
    truth: &LabelMap,
    model: &CorruptionModel,
    regions: &[CorruptedRegion],
) -> ProbMap<f64> {
    let n = truth.taxonomy().len();
    let row = |top: usize, conf: f64| -> Vec<f64> {
        if n == 1 {
            return vec![1.0];
        }
        let rest = (1.0 - conf) / (n - 1) as f64;
        (0..n).map(|c| if c == top { conf } else { rest }).collect()
    };
    let mut wrong: Vec<Option<ClassId>> = vec![None; truth.len()];
    for r in regions {
        for &p in &r.pixels {
            wrong[p] = Some(r.wrong);
        }
    }
    let mut probs = Vec::with_capacity(truth.len() * n);
    for (p, t) in truth.labels().iter().enumerate() {
        match wrong[p] {
            Some(wc) => probs.extend(row(wc.index(), model.corrupted_confidence)),
            None => probs.extend(row(t.index(), model.clean_confidence)),
        }
    }
    ProbMap::new(truth.width(), truth.height(), n, probs)
        .expect("rows are normalized by construction")
}
