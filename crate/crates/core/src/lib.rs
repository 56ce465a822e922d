//! Closed-loop land-cover segmentation: a pixel classifier whose output is
//! corrected by spatial rules over superpixel regions, with the corrections
//! fed back to the classifier as extra input channels.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, and the `*32` variants to `f32`.

pub mod classifier;
pub mod error;
pub mod eval;
pub mod io;
pub mod ontology;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod spatial;
pub mod superpixel;
pub mod synth;
pub mod taxonomy;

pub use error::{Error, Result};
pub use eval::{confusion, evaluate, mean_iou, overall_accuracy, ConfusionMatrix, Metrics};
pub use ontology::{
    apply_extra, apply_intra, builtin_extra_rules, builtin_intra_rules, builtin_rules, parse_rules,
    CorrectionLog, Rule, RuleBase, RuleKind,
};
pub use pipeline::{
    cbf_infer, cbf_train, Bootstrap, IterationRecord, PipelineConfig, Sample, TrainedPipeline,
};
pub use raster::{argmax_labels, zero_extra_channels, ExtraChannels, LabelMap};
pub use scalar::Scalar;
pub use spatial::{build_graph, RegionGraph};
pub use superpixel::{aggregate_units, slic_segment, SlicParams, SuperpixelMap, UnitStatus};
pub use taxonomy::{ClassId, ClassSet, ElevationBand, Taxonomy};

/// Default working precision.
pub type Real = f64;

pub type Image = raster::RasterImage<Real>;
pub type Probs = raster::ProbMap<Real>;
pub type Confidence = raster::ConfidenceMap<Real>;
pub type Unit = superpixel::InferenceUnit<Real>;
pub type Params = classifier::ClassifierParams<Real>;
pub type Pipeline = pipeline::TrainedPipeline<Real>;

pub type Image32 = raster::RasterImage<f32>;
pub type Probs32 = raster::ProbMap<f32>;
pub type Confidence32 = raster::ConfidenceMap<f32>;
pub type Unit32 = superpixel::InferenceUnit<f32>;
pub type Params32 = classifier::ClassifierParams<f32>;
pub type Pipeline32 = pipeline::TrainedPipeline<f32>;
