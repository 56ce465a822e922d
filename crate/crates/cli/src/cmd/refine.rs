use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;

use cbf_core::classifier::ingest_probmap;
use cbf_core::io::{
    correction_log_csv, extra_to_tensor, read_image, read_palette, write_label_png, write_tensor,
    write_text,
};
use cbf_core::pipeline::reason;
use cbf_core::{slic_segment, Image, PipelineConfig, Probs, SlicParams, Taxonomy};

use crate::config;
use crate::failure::{CliResult, Failure};

#[derive(Args, Debug)]
pub struct RefineArgs {
    /// Probability map: CBFT f32 tensor `[H, W, N]`.
    #[arg(long)]
    pub probs: PathBuf,
    /// Image to segment into superpixels; the probability map itself when omitted.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Class palette; the eight-class land-cover taxonomy when omitted.
    #[arg(long)]
    pub palette: Option<PathBuf>,
    /// Rule file; the built-in rules when omitted.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = PipelineConfig::default().k_target)]
    pub k: usize,
    #[arg(long, default_value_t = PipelineConfig::default().compactness)]
    pub compactness: f64,
    #[arg(long, default_value_t = PipelineConfig::default().f_t)]
    pub f_t: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &RefineArgs) -> CliResult<()> {
    if !(args.f_t > 0.0 && args.f_t < 1.0) {
        return Err(Failure::Config(format!(
            "--f-t {} must lie in (0,1)",
            args.f_t
        )));
    }
    let taxonomy = Arc::new(match &args.palette {
        Some(p) => read_palette(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => Taxonomy::ucm(),
    });
    let rules = config::load_rules(args.rules.as_deref(), &taxonomy)?;
    let probs: Probs = ingest_probmap(&args.probs)?;
    if probs.n_classes() != taxonomy.len() {
        return Err(Failure::Data(format!(
            "{}: {} classes, taxonomy has {}",
            args.probs.display(),
            probs.n_classes(),
            taxonomy.len()
        )));
    }
    let image: Image = match &args.image {
        Some(p) => read_image(p)?,
        None => probs.as_image(),
    };
    if image.width() != probs.width() || image.height() != probs.height() {
        return Err(Failure::Data(
            "image and probability map differ in size".into(),
        ));
    }
    let slic = SlicParams {
        k_target: args.k,
        compactness: args.compactness,
        max_iters: PipelineConfig::default().slic_iterations,
        seed: args.seed,
    };
    let spmap = slic_segment(&image, &slic)?;
    let r = reason(&probs, taxonomy.clone(), &spmap, &rules, args.f_t)?;

    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    write_label_png(&out.join("stage1.png"), &r.stage1)?;
    write_label_png(&out.join("refined.png"), &r.stage2)?;
    write_tensor(&out.join("extra.cbft"), &extra_to_tensor(&r.extra))?;
    write_text(
        &out.join("corrections.csv"),
        &correction_log_csv(&r.log, &taxonomy),
    )?;
    log::info!("{} units, {} corrected", r.units.len(), r.log.len());
    Ok(())
}
