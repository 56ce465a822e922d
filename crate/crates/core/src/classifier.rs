//! Per-pixel softmax classifier over windowed features, trained with Adam.
//!
//! Inputs are the image channels plus the rescaled shadow and elevation
//! channels; outputs are per-pixel class probabilities. An optional tanh
//! hidden layer turns the linear model into a small MLP.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ExtraChannels, LabelMap, ProbMap, RasterImage};
use crate::scalar::Scalar;

/// Feature length for an image with `channels` channels.
pub fn feature_dim(channels: usize) -> usize {
    3 * channels + 2
}

/// Row-major per-pixel feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T> FeatureMap<T> {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel(&self, idx: usize) -> &[T] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }
}

/// Per pixel: raw channels, shadow as `(v+1)/2`, elevation as `v/2`, then the
/// per-channel mean and standard deviation over the `(2r+1)²` window with
/// coordinates clamped to the image.
pub fn extract_features<T: Scalar>(
    image: &RasterImage<T>,
    extra: &ExtraChannels,
    radius: usize,
) -> Result<FeatureMap<T>> {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    if extra.width() != w || extra.height() != h {
        return Err(Error::Dimension(format!(
            "image {w}x{h}, extra channels {}x{}",
            extra.width(),
            extra.height()
        )));
    }
    let dim = feature_dim(ch);
    let r = radius as isize;
    let m = T::from_count((2 * radius + 1) * (2 * radius + 1));
    let half = T::lit(0.5);
    let mut data = vec![T::zero(); w * h * dim];
    data.par_chunks_mut(w * dim)
        .enumerate()
        .for_each(|(y, row)| {
            let mut window = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
            for x in 0..w {
                let i = y * w + x;
                let f = &mut row[x * dim..(x + 1) * dim];
                f[..ch].copy_from_slice(image.pixel(i));
                f[ch] = (T::from(extra.shadow()[i]).unwrap() + T::one()) * half;
                f[ch + 1] = T::from(extra.elevation()[i]).unwrap() * half;
                for c in 0..ch {
                    window.clear();
                    for dy in -r..=r {
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        for dx in -r..=r {
                            let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                            window.push(image.at(xx, yy, c));
                        }
                    }
                    let mean = window.iter().copied().sum::<T>() / m;
                    let (lo, hi) = window
                        .iter()
                        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                            (lo.min(v), hi.max(v))
                        });
                    let std = if lo == hi {
                        T::zero()
                    } else {
                        (window.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / m).sqrt()
                    };
                    f[ch + 2 + c] = mean;
                    f[2 * ch + 2 + c] = std;
                }
            }
        });
    Ok(FeatureMap {
        width: w,
        height: h,
        dim,
        data,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer<T> {
    pub width: usize,
    /// `feature_dim × width`, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams<T> {
    pub feature_dim: usize,
    pub n_classes: usize,
    /// `input × n_classes`, row-major; input is the hidden width when present.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub hidden: Option<HiddenLayer<T>>,
}

impl<T: Scalar> ClassifierParams<T> {
    /// All-zero linear model: uniform output.
    pub fn zeros(feature_dim: usize, n_classes: usize) -> Self {
        ClassifierParams {
            feature_dim,
            n_classes,
            weights: vec![T::zero(); feature_dim * n_classes],
            bias: vec![T::zero(); n_classes],
            hidden: None,
        }
    }

    /// Gaussian initialization scaled by fan-in; `hidden` adds a tanh layer.
    pub fn init(
        feature_dim: usize,
        n_classes: usize,
        hidden: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        if feature_dim == 0 || n_classes == 0 || hidden == Some(0) {
            return Err(Error::Parameter(
                "classifier dimensions must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |fan_in: usize, len: usize| -> Vec<T> {
            let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("valid normal");
            (0..len).map(|_| T::lit(normal.sample(&mut rng))).collect()
        };
        let hidden = hidden.map(|hw| HiddenLayer {
            width: hw,
            weights: draw(feature_dim, feature_dim * hw),
            bias: vec![T::zero(); hw],
        });
        let input = hidden.as_ref().map_or(feature_dim, |hl| hl.width);
        Ok(ClassifierParams {
            feature_dim,
            n_classes,
            weights: draw(input, input * n_classes),
            bias: vec![T::zero(); n_classes],
            hidden,
        })
    }

    fn input_width(&self) -> usize {
        self.hidden.as_ref().map_or(self.feature_dim, |h| h.width)
    }

    pub fn validate(&self) -> Result<()> {
        let input = self.input_width();
        let shapes_ok = self.weights.len() == input * self.n_classes
            && self.bias.len() == self.n_classes
            && self.hidden.as_ref().is_none_or(|h| {
                h.weights.len() == self.feature_dim * h.width && h.bias.len() == h.width
            });
        if !shapes_ok || self.n_classes == 0 || self.feature_dim == 0 {
            return Err(Error::Format(
                "classifier parameter shapes are inconsistent".into(),
            ));
        }
        if !self.is_finite() {
            return Err(Error::Format(
                "classifier parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn tensors(&self) -> Vec<&Vec<T>> {
        let mut v = vec![&self.weights, &self.bias];
        if let Some(h) = &self.hidden {
            v.push(&h.weights);
            v.push(&h.bias);
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut v = vec![&mut self.weights, &mut self.bias];
        if let Some(h) = &mut self.hidden {
            v.push(&mut h.weights);
            v.push(&mut h.bias);
        }
        v
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
        z
    }

    /// Every parameter in a fixed order: output weights, output bias, then
    /// hidden weights and bias.
    pub fn flatten(&self) -> Vec<T> {
        self.tensors().into_iter().flatten().copied().collect()
    }

    pub fn set_flat(&mut self, values: &[T]) -> Result<()> {
        let total: usize = self.tensors().iter().map(|t| t.len()).sum();
        if values.len() != total {
            return Err(Error::Dimension(format!(
                "{} values for {total} parameters",
                values.len()
            )));
        }
        let mut it = values.iter();
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Class probabilities of one feature vector; `hidden_out` receives the
    /// hidden activations.
    fn forward(&self, x: &[T], hidden_out: &mut [T], probs: &mut [T]) {
        let input: &[T] = match &self.hidden {
            Some(hl) => {
                for (j, a) in hidden_out.iter_mut().enumerate().take(hl.width) {
                    let mut s = hl.bias[j];
                    for (f, &xf) in x.iter().enumerate() {
                        s += xf * hl.weights[f * hl.width + j];
                    }
                    *a = s.tanh();
                }
                &hidden_out[..hl.width]
            }
            None => x,
        };
        let n = self.n_classes;
        probs.copy_from_slice(&self.bias);
        for (i, &v) in input.iter().enumerate() {
            let row = &self.weights[i * n..(i + 1) * n];
            for (p, &wv) in probs.iter_mut().zip(row) {
                *p += v * wv;
            }
        }
        let max = probs.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for p in probs.iter_mut() {
            *p = (*p - max).exp();
            sum += *p;
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
    }

    fn hidden_width(&self) -> usize {
        self.hidden.as_ref().map_or(0, |h| h.width)
    }

    /// Class probabilities for every pixel of a feature map.
    pub fn predict_features(&self, features: &FeatureMap<T>) -> Result<ProbMap<T>> {
        if features.dim != self.feature_dim {
            return Err(Error::Dimension(format!(
                "features have {} dims, classifier expects {}",
                features.dim, self.feature_dim
            )));
        }
        let n = self.n_classes;
        let hw = self.hidden_width();
        let mut probs = vec![T::zero(); features.len() * n];
        probs
            .par_chunks_mut(n * 256)
            .enumerate()
            .for_each(|(chunk, out)| {
                let mut hidden = vec![T::zero(); hw];
                for (k, p) in out.chunks_mut(n).enumerate() {
                    self.forward(features.pixel(chunk * 256 + k), &mut hidden, p);
                }
            });
        ProbMap::new(features.width, features.height, n, probs)
    }

    /// Sum over samples of `-ln p_y` and its gradient.
    pub fn loss_and_gradient(
        &self,
        features: &[&[T]],
        labels: &[usize],
    ) -> Result<(T, ClassifierParams<T>)> {
        if features.len() != labels.len() {
            return Err(Error::Dimension("feature and label counts differ".into()));
        }
        let mut grad = self.zeros_like();
        let mut loss = T::zero();
        let n = self.n_classes;
        let hw = self.hidden_width();
        let mut hidden = vec![T::zero(); hw];
        let mut p = vec![T::zero(); n];
        let mut dh = vec![T::zero(); hw];
        for (x, &y) in features.iter().zip(labels) {
            if x.len() != self.feature_dim || y >= n {
                return Err(Error::Dimension(
                    "sample does not match classifier shape".into(),
                ));
            }
            self.forward(x, &mut hidden, &mut p);
            loss -= p[y].max(T::min_positive_value()).ln();
            p[y] -= T::one();
            let input: &[T] = if hw > 0 { &hidden } else { x };
            for (i, &v) in input.iter().enumerate() {
                let g = &mut grad.weights[i * n..(i + 1) * n];
                for (gv, &dz) in g.iter_mut().zip(&p) {
                    *gv += v * dz;
                }
            }
            for (gb, &dz) in grad.bias.iter_mut().zip(&p) {
                *gb += dz;
            }
            if let (Some(hl), Some(ghl)) = (&self.hidden, &mut grad.hidden) {
                for (j, d) in dh.iter_mut().enumerate() {
                    let row = &self.weights[j * n..(j + 1) * n];
                    let back: T = row.iter().zip(&p).map(|(&wv, &dz)| wv * dz).sum();
                    *d = back * (T::one() - hidden[j] * hidden[j]);
                }
                for (f, &xf) in x.iter().enumerate() {
                    let g = &mut ghl.weights[f * hl.width..(f + 1) * hl.width];
                    for (gv, &d) in g.iter_mut().zip(&dh) {
                        *gv += xf * d;
                    }
                }
                for (gb, &d) in ghl.bias.iter_mut().zip(&dh) {
                    *gb += d;
                }
            }
        }
        Ok((loss, grad))
    }
}

/// Probabilities for an image and its extra channels.
pub fn predict<T: Scalar>(
    params: &ClassifierParams<T>,
    image: &RasterImage<T>,
    extra: &ExtraChannels,
    radius: usize,
) -> Result<ProbMap<T>> {
    params.predict_features(&extract_features(image, extra, radius)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    /// Pixels per minibatch.
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 10,
            batch: 256,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !beta_ok(self.adam_beta1) || !beta_ok(self.adam_beta2) {
            return Err(Error::Parameter("Adam betas must lie in (0,1)".into()));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::Parameter("Adam epsilon must be positive".into()));
        }
        if self.batch == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Flattened training pixels.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet<T> {
    pub dim: usize,
    pub features: Vec<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(dim: usize) -> Self {
        TrainingSet {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push_image(&mut self, features: &FeatureMap<T>, labels: &LabelMap) -> Result<()> {
        if features.dim != self.dim {
            return Err(Error::Dimension(format!(
                "feature dim {} vs {}",
                features.dim, self.dim
            )));
        }
        if features.width != labels.width() || features.height != labels.height() {
            return Err(Error::Dimension(
                "features and labels differ in size".into(),
            ));
        }
        self.features.extend_from_slice(&features.data);
        self.labels
            .extend(labels.labels().iter().map(|c| c.index()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

const LOSS_CHUNK: usize = 4096;

/// Mean cross-entropy over the whole set. Chunks are summed in a fixed
/// order so the value does not depend on thread scheduling.
pub fn mean_loss<T: Scalar>(params: &ClassifierParams<T>, data: &TrainingSet<T>) -> Result<T> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let partial = idx
        .par_chunks(LOSS_CHUNK)
        .map(|chunk| {
            let n = params.n_classes;
            let mut hidden = vec![T::zero(); params.hidden_width()];
            let mut p = vec![T::zero(); n];
            let mut s = T::zero();
            for &i in chunk {
                params.forward(data.sample(i), &mut hidden, &mut p);
                s -= p[data.labels[i]].max(T::min_positive_value()).ln();
            }
            s
        })
        .collect::<Vec<T>>();
    if data.is_empty() {
        return Err(Error::Empty("no training samples".into()));
    }
    Ok(partial.into_iter().fold(T::zero(), |a, b| a + b) / T::from_count(data.len()))
}

/// Minibatch Adam on the cross-entropy loss. Returns the trained parameters
/// and the mean training loss after each epoch.
pub fn train<T: Scalar>(
    params: &ClassifierParams<T>,
    data: &TrainingSet<T>,
    cfg: &TrainingConfig,
) -> Result<(ClassifierParams<T>, Vec<T>)> {
    cfg.validate()?;
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("no training samples".into()));
    }
    if data.dim != params.feature_dim || data.labels.iter().any(|&y| y >= params.n_classes) {
        return Err(Error::Dimension(
            "training data does not match classifier shape".into(),
        ));
    }
    let mut p = params.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok((p, history));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut m = p.flatten().iter().map(|_| T::zero()).collect::<Vec<_>>();
    let mut v = m.clone();
    let (b1, b2) = (T::lit(cfg.adam_beta1), T::lit(cfg.adam_beta2));
    let (lr, eps) = (T::lit(cfg.learning_rate), T::lit(cfg.adam_eps));
    let mut step = 0i32;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let xs: Vec<&[T]> = batch.iter().map(|&i| data.sample(i)).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let (_, g) = p.loss_and_gradient(&xs, &ys)?;
            let scale = T::one() / T::from_count(batch.len());
            step += 1;
            let c1 = T::one() - b1.powi(step);
            let c2 = T::one() - b2.powi(step);
            let mut flat = p.flatten();
            for (k, gk) in g.flatten().into_iter().enumerate() {
                let gk = gk * scale;
                m[k] = b1 * m[k] + (T::one() - b1) * gk;
                v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                flat[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
            p.set_flat(&flat)?;
        }
        let loss = mean_loss(&p, data)?;
        if !loss.is_finite() || !p.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        log::debug!("epoch {epoch}: loss {loss}");
        history.push(loss);
    }
    Ok((p, history))
}

/// Renormalize a raw `[H, W, N]` probability tensor. Rows within 1e-3 of unit
/// sum are rescaled; anything further off is rejected.
pub fn probmap_from_rows<T: Scalar>(
    width: usize,
    height: usize,
    n: usize,
    raw: &[f64],
) -> Result<ProbMap<T>> {
    if n == 0 || raw.len() != width * height * n {
        return Err(Error::Dimension(format!(
            "{} values for a {width}x{height}x{n} probability map",
            raw.len()
        )));
    }
    let mut out = Vec::with_capacity(raw.len());
    for (row, px) in raw.chunks(n).enumerate() {
        if px
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0 + 1e-3)
        {
            return Err(Error::Domain(format!(
                "probability outside [0,1] in row {row}"
            )));
        }
        let sum: f64 = px.iter().sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(Error::NotNormalizable { row, sum });
        }
        out.extend(px.iter().map(|v| T::lit((v / sum).min(1.0))));
    }
    ProbMap::new(width, height, n, out)
}

/// Read an external probability map in the CBFT tensor format.
pub fn ingest_probmap<T: Scalar>(path: &std::path::Path) -> Result<ProbMap<T>> {
    let tensor = crate::io::read_tensor(path)?;
    let [h, w, n] = tensor.dims[..] else {
        return Err(Error::Format(format!(
            "{}: probability map must have 3 dims, found {}",
            path.display(),
            tensor.dims.len()
        )));
    };
    let raw = tensor
        .as_f64()
        .ok_or_else(|| Error::Format(format!("{}: expected float32 payload", path.display())))?;
    probmap_from_rows(w, h, n, &raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::zero_extra_channels;

    #[test]
    fn feature_dims() {
        let img = RasterImage::<f64>::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let f = extract_features(&img, &zero_extra_channels(2, 2).unwrap(), 0).unwrap();
        assert_eq!(f.dim, 5);
        assert_eq!(feature_dim(3), 11);
        // r = 0: mean is the pixel itself, std 0; zero shadow maps to 0.5.
        assert_eq!(f.pixel(3), &[0.4, 0.5, 0.0, 0.4, 0.0]);
    }

    #[test]
    fn constant_image_has_zero_std() {
        let img = RasterImage::<f64>::new(5, 4, 2, vec![0.3; 40]).unwrap();
        let f = extract_features(&img, &zero_extra_channels(5, 4).unwrap(), 2).unwrap();
        for i in 0..20 {
            assert_eq!(&f.pixel(i)[6..8], &[0.0, 0.0]);
        }
    }

    #[test]
    fn corner_window_mean_is_clamped() {
        // 3 channels, r = 2 at the top-left corner: rows/cols -2..=2 clamp to
        // 0,0,0,1,2 so pixel (0,0) is counted 9 times, (1,0) and (0,1) 3 times, ...
        let (w, h) = (4usize, 4usize);
        let img =
            RasterImage::<f64>::from_fn(w, h, 3, |x, y, c| ((x + 4 * y) as f64 + c as f64) / 20.0)
                .unwrap();
        let f = extract_features(&img, &zero_extra_channels(w, h).unwrap(), 2).unwrap();
        assert_eq!(f.dim, 11);
        let weight = [3.0, 1.0, 1.0];
        for c in 0..3 {
            let mut s = 0.0;
            for (yi, wy) in weight.iter().enumerate() {
                for (xi, wx) in weight.iter().enumerate() {
                    s += wy * wx * img.at(xi, yi, c);
                }
            }
            assert!((f.pixel(0)[5 + c] - s / 25.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extra_channel_mismatch() {
        let img = RasterImage::<f64>::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            extract_features(&img, &zero_extra_channels(1, 2).unwrap(), 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zero_params_are_uniform() {
        let p = ClassifierParams::<f32>::zeros(5, 4);
        let img = RasterImage::<f32>::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let pm = predict(&p, &img, &zero_extra_channels(2, 1).unwrap(), 1).unwrap();
        assert!(pm.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let p = ClassifierParams::<f64>::init(3, 2, None, 1).unwrap();
        let data = TrainingSet {
            dim: 3,
            features: vec![0.1, 0.2, 0.3],
            labels: vec![1],
        };
        let cfg = TrainingConfig {
            epochs: 0,
            ..Default::default()
        };
        let (q, hist) = train(&p, &data, &cfg).unwrap();
        assert_eq!(q, p);
        assert!(hist.is_empty());
    }

    #[test]
    fn single_class_loss_is_zero() {
        let p = ClassifierParams::<f64>::init(2, 1, Some(3), 4).unwrap();
        let data = TrainingSet {
            dim: 2,
            features: vec![0.7, 0.1],
            labels: vec![0],
        };
        let cfg = TrainingConfig {
            epochs: 3,
            ..Default::default()
        };
        let (_, hist) = train(&p, &data, &cfg).unwrap();
        assert_eq!(hist, vec![0.0; 3]);
    }

    #[test]
    fn divergence_names_epoch() {
        let mut p = ClassifierParams::<f64>::zeros(1, 2);
        let data = TrainingSet {
            dim: 1,
            features: vec![f64::INFINITY],
            labels: vec![0],
        };
        p.weights = vec![1.0, -1.0];
        let cfg = TrainingConfig {
            epochs: 2,
            learning_rate: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            train(&p, &data, &cfg),
            Err(Error::Divergence { epoch: 1 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig {
            learning_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainingConfig {
            adam_beta1: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainingConfig::default().validate().is_ok());
    }

    #[test]
    fn row_renormalization() {
        let pm: ProbMap<f64> = probmap_from_rows(1, 1, 2, &[0.5005, 0.5]).unwrap();
        assert!((pm.pixel(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            probmap_from_rows::<f64>(1, 1, 2, &[0.25, 0.25]),
            Err(Error::NotNormalizable { row: 0, .. })
        ));
        assert!(probmap_from_rows::<f64>(1, 1, 2, &[-0.5, 1.5]).is_err());
    }

    #[test]
    fn flatten_roundtrip() {
        let p = ClassifierParams::<f64>::init(3, 2, Some(4), 9).unwrap();
        let mut q = p.zeros_like();
        q.set_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.flatten().len(), 3 * 4 + 4 + 4 * 2 + 2);
    }
}
