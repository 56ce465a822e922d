//! Raster containers shared across the pipeline: input images, label maps,
//! class-probability maps and the inferred shadow/elevation channels.
//!
//! All rasters are row-major with pixel index `y * width + x`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::taxonomy::{ClassId, Taxonomy};

/// Per-pixel probability vectors must sum to one within this tolerance.
pub const PROB_SUM_TOLERANCE: f64 = 1e-5;

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Multi-channel image with every value normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> RasterImage<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if channels == 0 {
            return Err(Error::Dimension("image needs at least one channel".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "expected {} values for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::Domain(format!(
                "image value {} at flat index {i} is outside [0,1]",
                data[i]
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn pixel(&self, idx: usize) -> &[T] {
        &self.data[idx * self.channels..(idx + 1) * self.channels]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn cast<U: Scalar>(&self) -> RasterImage<U> {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self
                .data
                .iter()
                .map(|v| U::from(*v).expect("float cast"))
                .collect(),
        }
    }
}

/// Per-pixel class labels bound to a taxonomy.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<ClassId>,
    taxonomy: Arc<Taxonomy>,
}

impl LabelMap {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<ClassId>,
        taxonomy: Arc<Taxonomy>,
    ) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| !taxonomy.contains(**l)) {
            return Err(Error::Domain(format!(
                "label {bad} outside taxonomy of {} classes",
                taxonomy.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
            taxonomy,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        class: ClassId,
        taxonomy: Arc<Taxonomy>,
    ) -> Result<Self> {
        Self::new(width, height, vec![class; width * height], taxonomy)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> ClassId {
        self.labels[idx]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> ClassId {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    /// Overwrite a set of pixels. Caller guarantees `class` is in the taxonomy.
    pub(crate) fn assign(&mut self, pixels: &[usize], class: ClassId) {
        for &p in pixels {
            self.labels[p] = class;
        }
    }

    /// Per-class pixel counts.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.taxonomy.len()];
        for l in &self.labels {
            h[l.index()] += 1;
        }
        h
    }
}

/// Per-pixel class-probability vectors (the classifier's forward output).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap<T> {
    width: usize,
    height: usize,
    n: usize,
    probs: Vec<T>,
}

impl<T: Scalar> ProbMap<T> {
    pub fn new(width: usize, height: usize, n: usize, probs: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if n == 0 {
            return Err(Error::Dimension(
                "probability map needs at least one class".into(),
            ));
        }
        if probs.len() != width * height * n {
            return Err(Error::Dimension(format!(
                "expected {} probabilities, got {}",
                width * height * n,
                probs.len()
            )));
        }
        let tol = T::lit(PROB_SUM_TOLERANCE);
        for (row, p) in probs.chunks_exact(n).enumerate() {
            if p.iter()
                .any(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one()))
            {
                return Err(Error::Domain(format!(
                    "pixel {row} has a probability outside [0,1]"
                )));
            }
            let s: T = p.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::Domain(format!(
                    "pixel {row} probabilities sum to {s}"
                )));
            }
        }
        Ok(ProbMap {
            width,
            height,
            n,
            probs,
        })
    }

    /// Exact one-hot encoding of a label map.
    pub fn one_hot(labels: &LabelMap) -> Self {
        let n = labels.taxonomy().len();
        let mut probs = vec![T::zero(); labels.len() * n];
        for (i, l) in labels.labels().iter().enumerate() {
            probs[i * n + l.index()] = T::one();
        }
        ProbMap {
            width: labels.width(),
            height: labels.height(),
            n,
            probs,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn pixel(&self, idx: usize) -> &[T] {
        &self.probs[idx * self.n..(idx + 1) * self.n]
    }

    pub fn data(&self) -> &[T] {
        &self.probs
    }

    /// View the probability vectors as an `n`-channel image.
    pub fn as_image(&self) -> RasterImage<T> {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: self.n,
            data: self.probs.clone(),
        }
    }
}

/// Per-pixel classification confidence in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceMap<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> ConfidenceMap<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} confidences, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::Domain("confidence outside [0,1]".into()));
        }
        Ok(ConfidenceMap {
            width,
            height,
            values,
        })
    }
}

pub const SHADOW_PRESENT: i8 = 1;
pub const SHADOW_UNCERTAIN: i8 = 0;
pub const SHADOW_ABSENT: i8 = -1;

/// Inferred shadow (`-1` absent, `0` uncertain, `+1` present) and relative
/// elevation (`0` low, `1` medium, `2` high) rasters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtraChannels {
    width: usize,
    height: usize,
    shadow: Vec<i8>,
    elevation: Vec<u8>,
}

impl ExtraChannels {
    pub fn new(width: usize, height: usize, shadow: Vec<i8>, elevation: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height;
        if shadow.len() != n || elevation.len() != n {
            return Err(Error::Dimension(format!(
                "extra channels need {n} values each, got shadow={} elevation={}",
                shadow.len(),
                elevation.len()
            )));
        }
        if let Some(v) = shadow.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::Domain(format!("shadow value {v} not in {{-1,0,1}}")));
        }
        if let Some(v) = elevation.iter().find(|v| **v > 2) {
            return Err(Error::Domain(format!(
                "elevation value {v} not in {{0,1,2}}"
            )));
        }
        Ok(ExtraChannels {
            width,
            height,
            shadow,
            elevation,
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

    pub fn shadow(&self) -> &[i8] {
        &self.shadow
    }

    pub fn elevation(&self) -> &[u8] {
        &self.elevation
    }

    pub fn is_zero(&self) -> bool {
        self.shadow.iter().all(|v| *v == 0) && self.elevation.iter().all(|v| *v == 0)
    }
}

/// Extra channels for the first training iteration: shadow uncertain, elevation low.
pub fn zero_extra_channels(width: usize, height: usize) -> Result<ExtraChannels> {
    check_dims(width, height)?;
    let n = width * height;
    Ok(ExtraChannels {
        width,
        height,
        shadow: vec![SHADOW_UNCERTAIN; n],
        elevation: vec![0; n],
    })
}

/// Per-pixel maximum-probability class and its probability. Ties go to the lowest class id.
pub fn argmax_labels<T: Scalar>(
    probs: &ProbMap<T>,
    taxonomy: Arc<Taxonomy>,
) -> Result<(LabelMap, ConfidenceMap<T>)> {
    if probs.n_classes() != taxonomy.len() {
        return Err(Error::Dimension(format!(
            "probability map has {} classes, taxonomy has {}",
            probs.n_classes(),
            taxonomy.len()
        )));
    }
    let mut labels = Vec::with_capacity(probs.len());
    let mut conf = Vec::with_capacity(probs.len());
    for i in 0..probs.len() {
        let (best, p) =
            probs
                .pixel(i)
                .iter()
                .enumerate()
                .fold((0usize, T::neg_infinity()), |acc, (c, &p)| {
                    if p > acc.1 {
                        (c, p)
                    } else {
                        acc
                    }
                });
        labels.push(ClassId::from_index(best));
        conf.push(p);
    }
    Ok((
        LabelMap {
            width: probs.width(),
            height: probs.height(),
            labels,
            taxonomy,
        },
        ConfidenceMap {
            width: probs.width(),
            height: probs.height(),
            values: conf,
        },
    ))
}
