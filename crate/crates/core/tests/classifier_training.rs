use std::sync::Arc;

use cbf_core::classifier::{
    extract_features, feature_dim, train, ClassifierParams, TrainingConfig, TrainingSet,
};
use cbf_core::raster::RasterImage;
use cbf_core::{argmax_labels, zero_extra_channels, ClassId, LabelMap, Taxonomy};

/// Three colored vertical stripes, one class each.
fn stripes() -> (RasterImage<f64>, LabelMap) {
    let (w, h) = (24, 8);
    let colors = [[0.9, 0.1, 0.1], [0.1, 0.8, 0.2], [0.2, 0.2, 0.9]];
    let img = RasterImage::from_fn(w, h, 3, |x, _, c| colors[x / 8][c]).unwrap();
    let tax = Arc::new(Taxonomy::ucm());
    let labels = (0..w * h).map(|i| ClassId(((i % w) / 8) as u8)).collect();
    (img, LabelMap::new(w, h, labels, tax).unwrap())
}

fn data(radius: usize) -> (TrainingSet<f64>, RasterImage<f64>, LabelMap) {
    let (img, truth) = stripes();
    let e = zero_extra_channels(img.width(), img.height()).unwrap();
    let f = extract_features(&img, &e, radius).unwrap();
    let mut set = TrainingSet::new(feature_dim(3));
    set.push_image(&f, &truth).unwrap();
    (set, img, truth)
}

fn cfg() -> TrainingConfig {
    TrainingConfig {
        learning_rate: 1e-2,
        epochs: 200,
        batch: 32,
        ..TrainingConfig::default()
    }
}

#[test]
fn separable_stripes_are_learned_exactly() {
    for hidden in [None, Some(6)] {
        let (set, img, truth) = data(0);
        let p0 = ClassifierParams::init(set.dim, 8, hidden, 1).unwrap();
        let (p, history) = train(&p0, &set, &cfg()).unwrap();
        assert_eq!(history.len(), 200);
        assert!(
            history.last().unwrap() < &0.05,
            "{hidden:?}: final loss {}",
            history.last().unwrap()
        );
        let probs =
            cbf_core::classifier::predict(&p, &img, &zero_extra_channels(24, 8).unwrap(), 0)
                .unwrap();
        let (pred, _) = argmax_labels(&probs, truth.taxonomy().clone()).unwrap();
        assert_eq!(pred, truth, "{hidden:?}");
    }
}

#[test]
fn full_batch_loss_never_rises() {
    let (set, _, _) = data(1);
    let p0 = ClassifierParams::init(set.dim, 8, None, 2).unwrap();
    let c = TrainingConfig {
        learning_rate: 1e-3,
        epochs: 100,
        batch: set.len(),
        ..TrainingConfig::default()
    };
    let (_, history) = train(&p0, &set, &c).unwrap();
    for pair in history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12, "{} then {}", pair[0], pair[1]);
    }
}

#[test]
fn training_is_reproducible() {
    let (set, _, _) = data(1);
    let p0 = ClassifierParams::init(set.dim, 8, Some(4), 3).unwrap();
    let c = TrainingConfig {
        epochs: 20,
        ..cfg()
    };
    let a = train(&p0, &set, &c).unwrap();
    let b = train(&p0, &set, &c).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    let other = train(&p0, &set, &TrainingConfig { seed: 1, ..c }).unwrap();
    assert_ne!(a.0, other.0);
}
