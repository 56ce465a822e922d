//! The closed training loop and two-stage inference.
//!
//! Each iteration trains the classifier on `(image, E)`, predicts every
//! training and validation image, corrects the prediction with the
//! correction rules, and derives fresh extra channels `E` from the corrected
//! map. The first iteration sees all-zero `E`.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    extract_features, feature_dim, predict, train, ClassifierParams, TrainingConfig, TrainingSet,
};
use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, Metrics};
use crate::ontology::{
    apply_extra, apply_intra, post_correction_snapshot, CorrectionLog, RuleBase,
};
use crate::raster::{
    argmax_labels, zero_extra_channels, ConfidenceMap, ExtraChannels, LabelMap, ProbMap,
    RasterImage,
};
use crate::scalar::Scalar;
use crate::spatial::{build_graph, RegionGraph};
use crate::superpixel::{aggregate_units, slic_segment, InferenceUnit, SlicParams, SuperpixelMap};
use crate::taxonomy::Taxonomy;

/// How inference obtains extra channels for an unseen image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bootstrap {
    /// Replay every retained iteration from all-zero channels, as in training.
    #[default]
    Chain,
    /// Predict with the final classifier on zero channels, reason, then predict again.
    TwoPass,
}

/// Loop settings. Flat so that it maps onto a plain key-value config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k_target: usize,
    pub compactness: f64,
    pub slic_iterations: usize,
    pub f_t: f64,
    pub max_iterations: usize,
    pub convergence_epsilon: f64,
    pub window_radius: usize,
    /// Width of the tanh hidden layer; 0 means a linear softmax model.
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub bootstrap: Bootstrap,
    /// Rule file, relative to the config file; built-in rules when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = TrainingConfig::default();
        PipelineConfig {
            k_target: 1000,
            compactness: 10.0,
            slic_iterations: 10,
            f_t: 0.7,
            max_iterations: 5,
            convergence_epsilon: 0.002,
            window_radius: 1,
            hidden_units: 0,
            learning_rate: t.learning_rate,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            epochs: t.epochs,
            batch: t.batch,
            seed: 0,
            bootstrap: Bootstrap::Chain,
            rules: None,
        }
    }
}

impl PipelineConfig {
    /// Settings tuned for the synthetic benchmark: a per-pixel linear model
    /// trained with a larger step.
    pub fn benchmark() -> Self {
        PipelineConfig {
            window_radius: 0,
            learning_rate: 1e-2,
            epochs: 6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_t > 0.0 && self.f_t < 1.0) {
            return Err(Error::Config(format!(
                "f_t = {} must lie in (0,1)",
                self.f_t
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon < 0.0 {
            return Err(Error::Config(
                "convergence_epsilon must be non-negative".into(),
            ));
        }
        if self.k_target == 0
            || self.slic_iterations == 0
            || self.compactness.is_nan()
            || self.compactness <= 0.0
        {
            return Err(Error::Config("superpixel settings must be positive".into()));
        }
        self.training(1)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn slic(&self) -> SlicParams {
        SlicParams {
            k_target: self.k_target,
            compactness: self.compactness,
            max_iters: self.slic_iterations,
            seed: self.seed,
        }
    }

    /// Optimizer settings for one loop iteration; the shuffle seed varies per iteration.
    pub fn training(&self, iteration: usize) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.learning_rate,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            epochs: self.epochs,
            batch: self.batch,
            seed: self.seed.wrapping_add(iteration as u64),
        }
    }
}

/// An image with its ground truth.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub image: RasterImage<T>,
    pub truth: LabelMap,
}

/// Validation metrics of one loop iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub stage1: Metrics,
    pub stage2: Metrics,
    /// Units relabeled across the validation images.
    pub corrections: usize,
    pub train_loss: f64,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl IterationRecord {
    pub fn stage1_oa(&self) -> f64 {
        self.stage1.oa
    }

    pub fn stage2_oa(&self) -> f64 {
        self.stage2.oa
    }
}

/// Everything the reasoner derives from one probability map.
#[derive(Clone, Debug)]
pub struct Reasoned<T> {
    pub stage1: LabelMap,
    pub confidence: ConfidenceMap<T>,
    pub units: Vec<InferenceUnit<T>>,
    pub graph: RegionGraph,
    pub stage2: LabelMap,
    pub log: CorrectionLog,
    pub extra: ExtraChannels,
}

/// Stage I labels, inference units, Stage II correction and extra channels
/// for one probability map over a fixed superpixel segmentation.
pub fn reason<T: Scalar>(
    probs: &ProbMap<T>,
    taxonomy: Arc<Taxonomy>,
    spmap: &SuperpixelMap,
    rules: &RuleBase,
    f_t: T,
) -> Result<Reasoned<T>> {
    let (stage1, confidence) = argmax_labels(probs, taxonomy)?;
    let units = aggregate_units(spmap, &stage1, &confidence, f_t)?;
    let graph = build_graph(&units, probs.width(), probs.height())?;
    let (stage2, log) = apply_intra(&units, &graph, &rules.intra(), &stage1)?;
    let snap = post_correction_snapshot(&units, &log);
    let extra = apply_extra(&units, &graph, &rules.extra(), &snap)?;
    Ok(Reasoned {
        stage1,
        confidence,
        units,
        graph,
        stage2,
        log,
        extra,
    })
}

/// Trained classifier chain plus everything inference needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedPipeline<T> {
    pub config: PipelineConfig,
    pub taxonomy: Taxonomy,
    /// Rule base in DSL form.
    pub rules: String,
    /// Parameters of iterations `1..=best_iteration`, in order. Iteration
    /// `k` was trained on extra channels produced by iteration `k-1`.
    pub chain: Vec<ClassifierParams<T>>,
    pub best_iteration: usize,
}

/// Output of one inference pass.
#[derive(Clone, Debug)]
pub struct Inference<T> {
    pub stage1: LabelMap,
    pub stage2: LabelMap,
    pub log: CorrectionLog,
    pub probs: ProbMap<T>,
    pub extra: ExtraChannels,
}

impl<T: Scalar> TrainedPipeline<T> {
    pub fn rule_base(&self) -> Result<RuleBase> {
        crate::ontology::parse_rules(&self.rules, Arc::new(self.taxonomy.clone()))
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.chain.is_empty() || self.best_iteration != self.chain.len() {
            return Err(Error::State("pipeline has no trained classifier".into()));
        }
        for p in &self.chain {
            p.validate()?;
            if p.n_classes != self.taxonomy.len() {
                return Err(Error::State(
                    "classifier and taxonomy disagree on class count".into(),
                ));
            }
        }
        self.rule_base().map(|_| ())
    }

    /// Two-stage inference. Extra channels are bootstrapped by replaying the
    /// chain from all-zero channels, so the final classifier sees inputs
    /// produced the same way as during training.
    pub fn infer(&self, image: &RasterImage<T>) -> Result<Inference<T>> {
        self.validate()?;
        let rules = self.rule_base()?;
        let spmap = slic_segment(image, &self.config.slic())?;
        self.infer_with(image, &spmap, &rules)
    }

    fn infer_with(
        &self,
        image: &RasterImage<T>,
        spmap: &SuperpixelMap,
        rules: &RuleBase,
    ) -> Result<Inference<T>> {
        let tax = Arc::new(self.taxonomy.clone());
        let f_t = T::lit(self.config.f_t);
        let r = self.config.window_radius;
        let last = self.chain.len() - 1;
        let steps: Vec<&ClassifierParams<T>> = match self.config.bootstrap {
            Bootstrap::Chain => self.chain.iter().collect(),
            Bootstrap::TwoPass => vec![&self.chain[last]; 2],
        };
        let mut extra = zero_extra_channels(image.width(), image.height())?;
        for (k, params) in steps.iter().enumerate() {
            let probs = predict(params, image, &extra, r)?;
            let reasoned = reason(&probs, tax.clone(), spmap, rules, f_t)?;
            if k + 1 == steps.len() {
                return Ok(Inference {
                    stage1: reasoned.stage1,
                    stage2: reasoned.stage2,
                    log: reasoned.log,
                    probs,
                    extra: reasoned.extra,
                });
            }
            extra = reasoned.extra;
        }
        unreachable!("validated pipelines have at least one classifier")
    }
}

/// Per-iteration artifacts offered to the observer of [`cbf_train_with`].
pub struct IterationArtifacts<'a, T> {
    pub record: &'a IterationRecord,
    pub params: &'a ClassifierParams<T>,
    /// Validation images, in input order.
    pub val: &'a [Reasoned<T>],
    pub loss_history: &'a [T],
}

/// Train the closed loop. Returns the pipeline truncated at the best
/// iteration and the full history.
pub fn cbf_train<T: Scalar>(
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    cfg: &PipelineConfig,
    rules: &RuleBase,
) -> Result<(TrainedPipeline<T>, Vec<IterationRecord>)> {
    cbf_train_with(train_set, val_set, cfg, rules, |_| Ok(()))
}

pub fn cbf_train_with<T: Scalar>(
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    cfg: &PipelineConfig,
    rules: &RuleBase,
    mut observe: impl FnMut(&IterationArtifacts<'_, T>) -> Result<()>,
) -> Result<(TrainedPipeline<T>, Vec<IterationRecord>)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Empty(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let taxonomy = train_set[0].truth.taxonomy().clone();
    let channels = train_set[0].image.channels();
    for s in train_set.iter().chain(val_set) {
        if s.truth.taxonomy() != &taxonomy {
            return Err(Error::Taxonomy("samples use different taxonomies".into()));
        }
        if s.image.channels() != channels {
            return Err(Error::Dimension("samples differ in channel count".into()));
        }
        if s.image.width() != s.truth.width() || s.image.height() != s.truth.height() {
            return Err(Error::Dimension("image and truth differ in size".into()));
        }
    }
    if rules.taxonomy() != &taxonomy {
        return Err(Error::Taxonomy(
            "rule base and samples use different taxonomies".into(),
        ));
    }

    let all: Vec<&Sample<T>> = train_set.iter().chain(val_set).collect();
    let slic = cfg.slic();
    let spmaps: Vec<SuperpixelMap> = all
        .par_iter()
        .map(|s| slic_segment(&s.image, &slic))
        .collect::<Result<_>>()?;
    let mut extras: Vec<ExtraChannels> = all
        .iter()
        .map(|s| zero_extra_channels(s.image.width(), s.image.height()))
        .collect::<Result<_>>()?;

    let dim = feature_dim(channels);
    let hidden = (cfg.hidden_units > 0).then_some(cfg.hidden_units);
    let mut params = ClassifierParams::<T>::init(dim, taxonomy.len(), hidden, cfg.seed)?;
    let mut chain: Vec<ClassifierParams<T>> = Vec::new();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let f_t = T::lit(cfg.f_t);
    let n_train = train_set.len();

    for iteration in 1..=cfg.max_iterations {
        let started = Instant::now();
        let feats = train_set
            .par_iter()
            .zip(&extras[..n_train])
            .map(|(s, e)| extract_features(&s.image, e, cfg.window_radius))
            .collect::<Result<Vec<_>>>()?;
        let mut data = TrainingSet::new(dim);
        for (f, s) in feats.iter().zip(train_set) {
            data.push_image(f, &s.truth)?;
        }
        drop(feats);
        let (trained, losses) = train(&params, &data, &cfg.training(iteration))?;
        drop(data);
        params = trained;

        let reasoned: Vec<Reasoned<T>> = all
            .par_iter()
            .zip(&spmaps)
            .zip(&extras)
            .map(|((s, sp), e)| {
                let probs = predict(&params, &s.image, e, cfg.window_radius)?;
                reason(&probs, taxonomy.clone(), sp, rules, f_t)
            })
            .collect::<Result<_>>()?;

        let mut cm1 = ConfusionMatrix::zeros(taxonomy.len());
        let mut cm2 = ConfusionMatrix::zeros(taxonomy.len());
        let mut corrections = 0;
        for (r, s) in reasoned[n_train..].iter().zip(val_set) {
            cm1.accumulate(&r.stage1, &s.truth)?;
            cm2.accumulate(&r.stage2, &s.truth)?;
            corrections += r.log.len();
        }
        let record = IterationRecord {
            iteration,
            stage1: Metrics::from_confusion(&cm1)?,
            stage2: Metrics::from_confusion(&cm2)?,
            corrections,
            train_loss: losses.last().map_or(f64::NAN, |l| l.as_f64()),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "iteration {iteration}: stage1 OA {:.4} mIOU {:.4}, stage2 OA {:.4} mIOU {:.4}, {} corrections",
            record.stage1.oa,
            record.stage1.miou,
            record.stage2.oa,
            record.stage2.miou,
            corrections
        );
        observe(&IterationArtifacts {
            record: &record,
            params: &params,
            val: &reasoned[n_train..],
            loss_history: &losses,
        })?;

        chain.push(params.clone());
        let oa = record.stage2.oa;
        history.push(record);
        let improved_enough = match best {
            None => true,
            Some((_, b)) => oa - b >= cfg.convergence_epsilon,
        };
        if best.is_none_or(|(_, b)| oa > b) {
            best = Some((iteration, oa));
        }
        if !improved_enough {
            break;
        }
        extras = reasoned.into_iter().map(|r| r.extra).collect();
    }

    let best_iteration = best.map(|(i, _)| i).expect("at least one iteration ran");
    chain.truncate(best_iteration);
    Ok((
        TrainedPipeline {
            config: cfg.clone(),
            taxonomy: (*taxonomy).clone(),
            rules: rules.to_dsl(),
            chain,
            best_iteration,
        },
        history,
    ))
}

/// Iteration with the highest Stage II OA; ties go to the earliest.
pub fn best_iteration(history: &[IterationRecord]) -> Option<usize> {
    history
        .iter()
        .fold(None, |best: Option<&IterationRecord>, r| match best {
            Some(b) if b.stage2.oa >= r.stage2.oa => Some(b),
            _ => Some(r),
        })
        .map(|r| r.iteration)
}

/// Free-function form of [`TrainedPipeline::infer`].
pub fn cbf_infer<T: Scalar>(
    pipeline: &TrainedPipeline<T>,
    image: &RasterImage<T>,
) -> Result<Inference<T>> {
    pipeline.infer(image)
}
