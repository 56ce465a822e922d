//! SLIC superpixels and their aggregation into inference units.
//!
//! Superpixels come from a simple linear iterative clustering over the image
//! channels plus pixel position. Each superpixel takes the majority label of
//! its pixels; 4-adjacent superpixels of equal class are then merged into
//! connected inference units whose confidence is the mean pixel confidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ConfidenceMap, LabelMap, RasterImage};
use crate::scalar::Scalar;
use crate::taxonomy::ClassId;

/// Channels arrive normalized to [0,1]; the color distance is measured on the
/// 0..100 scale of CIELAB lightness so the canonical compactness of 10 keeps
/// its usual balance between color and space.
const COLOR_SCALE: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    pub k_target: usize,
    pub compactness: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            k_target: 1000,
            compactness: 10.0,
            max_iters: 10,
            seed: 0,
        }
    }
}

/// Total partition of the image into 4-connected superpixels with dense ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    assignment: Vec<u32>,
    count: usize,
}

impl SuperpixelMap {
    pub fn new(width: usize, height: usize, assignment: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || assignment.len() != width * height {
            return Err(Error::Dimension(format!(
                "assignment of length {} does not match {width}x{height}",
                assignment.len()
            )));
        }
        let count = assignment
            .iter()
            .map(|a| *a as usize + 1)
            .max()
            .unwrap_or(0);
        let mut seen = vec![false; count];
        for a in &assignment {
            seen[*a as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Partition("superpixel ids are not dense".into()));
        }
        Ok(SuperpixelMap {
            width,
            height,
            assignment,
            count,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of superpixels actually produced.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, idx: usize) -> u32 {
        self.assignment[idx]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Pixel indices of every superpixel, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, a) in self.assignment.iter().enumerate() {
            out[*a as usize].push(i);
        }
        out
    }
}

/// Ranking of a candidate grid: count error, aspect error, then prefer more columns.
type GridKey = (usize, f64, std::cmp::Reverse<usize>);

fn choose_grid(width: usize, height: usize, k: usize) -> (usize, usize) {
    let ideal = (k as f64 * width as f64 / height as f64).sqrt();
    let mut best: Option<(GridKey, (usize, usize))> = None;
    let lo = (ideal.floor() as usize).max(1);
    for nx in [lo, lo + 1] {
        let nx = nx.clamp(1, width);
        let ny = ((k as f64 / nx as f64).round() as usize).clamp(1, height);
        let count_err = (nx * ny).abs_diff(k);
        let aspect = ((width as f64 / nx as f64) / (height as f64 / ny as f64))
            .ln()
            .abs();
        let key = (count_err, aspect, std::cmp::Reverse(nx));
        let better = match &best {
            None => true,
            Some((bk, _)) => {
                key.0 < bk.0
                    || (key.0 == bk.0
                        && (key.1 < bk.1 - 1e-12
                            || ((key.1 - bk.1).abs() <= 1e-12 && key.2 < bk.2)))
            }
        };
        if better {
            best = Some((key, (nx, ny)));
        }
    }
    best.map(|b| b.1).unwrap_or((1, 1))
}

struct Center {
    x: f64,
    y: f64,
    color: Vec<f64>,
}

/// Segment an image into roughly `k_target` compact, 4-connected superpixels.
pub fn slic_segment<T: Scalar>(
    image: &RasterImage<T>,
    params: &SlicParams,
) -> Result<SuperpixelMap> {
    let (w, h, nc) = (image.width(), image.height(), image.channels());
    let n = w * h;
    if params.k_target == 0 || params.k_target > n {
        return Err(Error::Parameter(format!(
            "k_target {} must lie in 1..={n}",
            params.k_target
        )));
    }
    if params.max_iters == 0 {
        return Err(Error::Parameter("max_iters must be at least 1".into()));
    }
    if !(params.compactness.is_finite() && params.compactness > 0.0) {
        return Err(Error::Parameter("compactness must be positive".into()));
    }
    let data: Vec<f64> = image
        .data()
        .iter()
        .map(|v| v.as_f64() * COLOR_SCALE)
        .collect();
    let px = |i: usize| &data[i * nc..(i + 1) * nc];

    let (nx, ny) = choose_grid(w, h, params.k_target);
    let cell_w = w as f64 / nx as f64;
    let cell_h = h as f64 / ny as f64;
    let step = (cell_w * cell_h).sqrt();
    let radius = cell_w.max(cell_h).ceil() as isize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let gradient = |x: usize, y: usize| -> f64 {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(w - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        let (a, b) = (px(y * w + xr), px(y * w + xl));
        let (c, d) = (px(yd * w + x), px(yu * w + x));
        (0..nc)
            .map(|k| (a[k] - b[k]).powi(2) + (c[k] - d[k]).powi(2))
            .sum()
    };

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let jx: f64 = rng.random_range(-0.25..0.25);
            let jy: f64 = rng.random_range(-0.25..0.25);
            let cx = ((i as f64 + 0.5 + jx) * cell_w).clamp(0.0, (w - 1) as f64);
            let cy = ((j as f64 + 0.5 + jy) * cell_h).clamp(0.0, (h - 1) as f64);
            let (mut bx, mut by) = (cx.floor() as usize, cy.floor() as usize);
            let mut best = gradient(bx, by);
            let (x0, y0) = (bx, by);
            for yy in y0.saturating_sub(1)..=(y0 + 1).min(h - 1) {
                for xx in x0.saturating_sub(1)..=(x0 + 1).min(w - 1) {
                    let g = gradient(xx, yy);
                    if g < best {
                        best = g;
                        bx = xx;
                        by = yy;
                    }
                }
            }
            centers.push(Center {
                x: bx as f64,
                y: by as f64,
                color: px(by * w + bx).to_vec(),
            });
        }
    }

    let spatial_weight = (params.compactness / step).powi(2);
    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    let distance = |c: &Center, i: usize, x: usize, y: usize| -> f64 {
        let p = px(i);
        let dc: f64 = c.color.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum();
        let ds = (c.x - x as f64).powi(2) + (c.y - y as f64).powi(2);
        dc + ds * spatial_weight
    };

    for _ in 0..params.max_iters {
        dist.fill(f64::INFINITY);
        let mut changed = false;
        for (ci, c) in centers.iter().enumerate() {
            let cx = c.x.round() as isize;
            let cy = c.y.round() as isize;
            let x0 = (cx - radius).max(0) as usize;
            let x1 = ((cx + radius) as usize).min(w - 1);
            let y0 = (cy - radius).max(0) as usize;
            let y1 = ((cy + radius) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    let d = distance(c, i, x, y);
                    if d < dist[i] {
                        dist[i] = d;
                        if labels[i] != ci as u32 {
                            labels[i] = ci as u32;
                            changed = true;
                        }
                    }
                }
            }
        }
        // Pixels no search window reached fall back to the nearest center overall.
        for i in 0..n {
            if dist[i].is_infinite() {
                let (x, y) = (i % w, i / w);
                let (ci, _) = centers
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| (ci, distance(c, i, x, y)))
                    .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                if labels[i] != ci as u32 {
                    labels[i] = ci as u32;
                    changed = true;
                }
            }
        }
        let mut sums = vec![0.0f64; centers.len() * (nc + 2)];
        let mut counts = vec![0usize; centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let l = l as usize;
            let s = &mut sums[l * (nc + 2)..(l + 1) * (nc + 2)];
            s[0] += (i % w) as f64;
            s[1] += (i / w) as f64;
            for (k, v) in px(i).iter().enumerate() {
                s[2 + k] += v;
            }
            counts[l] += 1;
        }
        for (ci, c) in centers.iter_mut().enumerate() {
            if counts[ci] == 0 {
                continue;
            }
            let s = &sums[ci * (nc + 2)..(ci + 1) * (nc + 2)];
            let m = counts[ci] as f64;
            c.x = s[0] / m;
            c.y = s[1] / m;
            for k in 0..nc {
                c.color[k] = s[2 + k] / m;
            }
        }
        if !changed {
            break;
        }
    }

    let min_size = n as f64 / (4.0 * params.k_target as f64);
    let assignment = enforce_connectivity(&labels, w, h, min_size);
    SuperpixelMap::new(w, h, assignment)
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }
}

/// Label 4-connected components of equal value; returns per-pixel component
/// ids numbered in raster order of first pixel.
pub(crate) fn connected_components<L: PartialEq>(
    values: &[L],
    w: usize,
    h: usize,
) -> (Vec<usize>, usize) {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && values[j] == values[start] {
                    comp[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        next += 1;
    }
    (comp, next)
}

/// Split superpixels into 4-connected fragments and absorb fragments smaller
/// than `min_size` into their largest adjacent neighbor.
fn enforce_connectivity(labels: &[u32], w: usize, h: usize, min_size: f64) -> Vec<u32> {
    let (comp, ncomp) = connected_components(labels, w, h);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for (i, c) in comp.iter().enumerate() {
        members[*c].push(i);
    }
    let mut size: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut ds = DisjointSet::new(ncomp);

    // Components are numbered in raster order of their first pixel.
    for c in 0..ncomp {
        let root = ds.find(c);
        if size[root] as f64 >= min_size {
            continue;
        }
        let mut best: Option<usize> = None;
        for &i in &members[root] {
            let (x, y) = (i % w, i / w);
            let mut consider = |j: usize, ds: &mut DisjointSet| {
                let r = ds.find(comp[j]);
                if r != root {
                    best = match best {
                        Some(b) if size[b] > size[r] || (size[b] == size[r] && b < r) => Some(b),
                        _ => Some(r),
                    };
                }
            };
            if x > 0 {
                consider(i - 1, &mut ds);
            }
            if x + 1 < w {
                consider(i + 1, &mut ds);
            }
            if y > 0 {
                consider(i - w, &mut ds);
            }
            if y + 1 < h {
                consider(i + w, &mut ds);
            }
        }
        if let Some(target) = best {
            ds.parent[root] = target;
            size[target] += size[root];
            let moved = std::mem::take(&mut members[root]);
            members[target].extend(moved);
        }
    }

    let mut dense = vec![u32::MAX; ncomp];
    let mut next = 0u32;
    let mut out = Vec::with_capacity(w * h);
    for &c in &comp {
        let r = ds.find(c);
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        out.push(dense[r]);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitStatus {
    Classified,
    MisClassified,
}

/// Connected group of same-class superpixels; the atom of reasoning.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceUnit<T> {
    pub id: usize,
    /// Pixel indices, ascending.
    pub pixels: Vec<usize>,
    pub class: ClassId,
    pub confidence: T,
    pub status: UnitStatus,
}

impl<T> InferenceUnit<T> {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Class with the most pixels in the set; ties go to the lowest class id.
pub fn majority_label(pixels: &[usize], labels: &LabelMap) -> Result<ClassId> {
    if pixels.is_empty() {
        return Err(Error::EmptyUnit);
    }
    let mut counts = vec![0usize; labels.taxonomy().len()];
    for &p in pixels {
        counts[labels.get(p).index()] += 1;
    }
    let (best, _) = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (c, &k)| if k > acc.1 { (c, k) } else { acc });
    Ok(ClassId::from_index(best))
}

/// Merge 4-adjacent superpixels of equal majority class into inference units.
///
/// Unit ids follow raster order of each unit's first pixel. A unit is
/// `MisClassified` when its mean confidence is strictly below `f_t`.
pub fn aggregate_units<T: Scalar>(
    spmap: &SuperpixelMap,
    labels: &LabelMap,
    conf: &ConfidenceMap<T>,
    f_t: T,
) -> Result<Vec<InferenceUnit<T>>> {
    let (w, h) = (spmap.width(), spmap.height());
    if labels.width() != w || labels.height() != h || conf.width != w || conf.height != h {
        return Err(Error::Dimension(format!(
            "superpixels {w}x{h}, labels {}x{}, confidence {}x{}",
            labels.width(),
            labels.height(),
            conf.width,
            conf.height
        )));
    }
    if !(f_t > T::zero() && f_t < T::one()) {
        return Err(Error::Parameter(format!(
            "confidence threshold {f_t} must lie in (0,1)"
        )));
    }
    let members = spmap.members();
    let sp_class = members
        .iter()
        .map(|m| majority_label(m, labels))
        .collect::<Result<Vec<_>>>()?;

    let mut ds = DisjointSet::new(spmap.count());
    let union = |a: usize, b: usize, ds: &mut DisjointSet| {
        if sp_class[a] == sp_class[b] {
            let (ra, rb) = (ds.find(a), ds.find(b));
            if ra != rb {
                ds.parent[ra.max(rb)] = ra.min(rb);
            }
        }
    };
    for y in 0..h {
        for x in 0..w {
            let a = spmap.get(y * w + x) as usize;
            if x + 1 < w {
                let b = spmap.get(y * w + x + 1) as usize;
                if a != b {
                    union(a, b, &mut ds);
                }
            }
            if y + 1 < h {
                let b = spmap.get((y + 1) * w + x) as usize;
                if a != b {
                    union(a, b, &mut ds);
                }
            }
        }
    }

    let mut unit_of_root = vec![usize::MAX; spmap.count()];
    let mut units: Vec<InferenceUnit<T>> = Vec::new();
    let mut sums: Vec<T> = Vec::new();
    for i in 0..w * h {
        let sp = spmap.get(i) as usize;
        let root = ds.find(sp);
        if unit_of_root[root] == usize::MAX {
            unit_of_root[root] = units.len();
            units.push(InferenceUnit {
                id: units.len(),
                pixels: Vec::new(),
                class: sp_class[sp],
                confidence: T::zero(),
                status: UnitStatus::Classified,
            });
            sums.push(T::zero());
        }
        let u = unit_of_root[root];
        units[u].pixels.push(i);
        sums[u] += conf.values[i];
    }
    for (u, s) in units.iter_mut().zip(sums) {
        u.confidence = (s / T::from_count(u.pixels.len()))
            .min(T::one())
            .max(T::zero());
        u.status = if u.confidence < f_t {
            UnitStatus::MisClassified
        } else {
            UnitStatus::Classified
        };
    }
    Ok(units)
}
