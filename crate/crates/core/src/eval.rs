//! Confusion matrices, overall accuracy and mean IoU.
//!
//! Metric functions are generic over any numeric type that can be built from
//! a count, so exact rational arithmetic works as well as floats.

use std::ops::Add;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::LabelMap;

/// `counts[t * n + p]` = pixels with truth `t` predicted as `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        ConfusionMatrix {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    pub fn add_pair(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.n + pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.n).map(|p| self.get(c, p)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.n).map(|t| self.get(t, c)).sum()
    }

    /// Tally `pred` against `truth` pixel by pixel and add to this matrix.
    pub fn accumulate(&mut self, pred: &LabelMap, truth: &LabelMap) -> Result<()> {
        if pred.width() != truth.width() || pred.height() != truth.height() {
            return Err(Error::Dimension(format!(
                "prediction {}x{} vs truth {}x{}",
                pred.width(),
                pred.height(),
                truth.width(),
                truth.height()
            )));
        }
        if pred.taxonomy() != truth.taxonomy() || pred.taxonomy().len() != self.n {
            return Err(Error::Taxonomy(
                "prediction and truth use different taxonomies".into(),
            ));
        }
        for (p, t) in pred.labels().iter().zip(truth.labels()) {
            self.add_pair(t.index(), p.index());
        }
        Ok(())
    }
}

impl Add for ConfusionMatrix {
    type Output = Result<ConfusionMatrix>;

    fn add(mut self, rhs: ConfusionMatrix) -> Result<ConfusionMatrix> {
        if self.n != rhs.n {
            return Err(Error::Dimension(format!("{} vs {} classes", self.n, rhs.n)));
        }
        for (a, b) in self.counts.iter_mut().zip(rhs.counts) {
            *a += b;
        }
        Ok(self)
    }
}

/// Pixel tally of `pred` against `truth`.
pub fn confusion(pred: &LabelMap, truth: &LabelMap) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::zeros(truth.taxonomy().len());
    cm.accumulate(pred, truth)?;
    Ok(cm)
}

fn count<T: FromPrimitive>(v: u64) -> T {
    T::from_u64(v).expect("count representable")
}

/// Trace over total.
pub fn overall_accuracy<T: Num + FromPrimitive>(cm: &ConfusionMatrix) -> Result<T> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no pixels".into()));
    }
    Ok(count::<T>(cm.trace()) / count::<T>(total))
}

/// Mean Jaccard index over classes present in truth or prediction, and the
/// per-class values (`None` for absent classes).
pub fn mean_iou<T: Num + FromPrimitive + Copy>(
    cm: &ConfusionMatrix,
) -> Result<(T, Vec<Option<T>>)> {
    if cm.total() == 0 {
        return Err(Error::Empty("confusion matrix has no pixels".into()));
    }
    let per_class: Vec<Option<T>> = (0..cm.n)
        .map(|c| {
            let tp = cm.get(c, c);
            let denom = cm.row_sum(c) + cm.col_sum(c) - tp;
            (denom > 0).then(|| count::<T>(tp) / count::<T>(denom))
        })
        .collect();
    let present: Vec<T> = per_class.iter().flatten().copied().collect();
    let sum = present.iter().fold(T::zero(), |a, &b| a + b);
    Ok((sum / count::<T>(present.len() as u64), per_class))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub oa: f64,
    pub miou: f64,
    pub per_class_iou: Vec<Option<f64>>,
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let oa = overall_accuracy(cm)?;
        let (miou, per_class_iou) = mean_iou(cm)?;
        Ok(Metrics {
            oa,
            miou,
            per_class_iou,
        })
    }
}

/// Metrics of `pred` against `truth`.
pub fn evaluate(pred: &LabelMap, truth: &LabelMap) -> Result<Metrics> {
    Metrics::from_confusion(&confusion(pred, truth)?)
}
