use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use cbf_core::io::{
    correction_log_csv, extra_to_tensor, write_json, write_label_png, write_tensor, write_text,
};
use cbf_core::pipeline::{cbf_train_with, IterationArtifacts};
use cbf_core::{IterationRecord, Metrics, PipelineConfig, Sample, Taxonomy};

use crate::config;
use crate::dataset::Dataset;
use crate::failure::{CliResult, Failure};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Pipeline config file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Scene directory with a split file.
    #[arg(long)]
    pub data: PathBuf,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rule file; overrides the config's `rules` key.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Override any config key, e.g. `--set learning_rate=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub iteration: usize,
    pub checkpoint: String,
    pub label_maps: Vec<String>,
    pub extra_channels: Vec<String>,
    pub logs: Vec<String>,
}

/// Everything needed to audit or repeat a training run. Paths are relative to
/// the run directory unless they point at inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub config_path: String,
    pub data_dir: String,
    pub rules_path: Option<String>,
    pub train_scenes: Vec<String>,
    pub val_scenes: Vec<String>,
    pub test_scenes: Vec<String>,
    pub iterations: Vec<IterationEntry>,
    pub best_iteration: usize,
    pub pipeline: String,
    pub metrics: String,
    pub metrics_by_stage: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const PIPELINE: &str = "pipeline.json";

fn rel(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let mut overrides = args.overrides.clone();
    if let Some(n) = args.max_iterations {
        overrides.push(format!("max_iterations={n}"));
    }
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = config::load(&args.config, &overrides)?;
    let rules_path = args
        .rules
        .clone()
        .or_else(|| config::rules_path(&cfg, &args.config));
    let data = Dataset::load(&args.data)?;
    let rules = config::load_rules(rules_path.as_deref(), &data.taxonomy)?;
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;

    let train: Vec<Sample<f64>> = data.train.iter().map(|s| s.sample.clone()).collect();
    let val: Vec<Sample<f64>> = data.val.iter().map(|s| s.sample.clone()).collect();
    let val_names: Vec<&str> = data.val.iter().map(|s| s.name.as_str()).collect();
    let taxonomy = data.taxonomy.clone();
    let mut entries = Vec::new();

    let (pipeline, history) = cbf_train_with(
        &train,
        &val,
        &cfg,
        &rules,
        |a: &IterationArtifacts<'_, f64>| {
            let entry = write_iteration(out, a, &val_names, &taxonomy)?;
            log::info!(
                "iteration {} took {:.1}s",
                a.record.iteration,
                a.record.wall_time_s
            );
            entries.push(entry);
            Ok(())
        },
    )?;

    write_json(&out.join(PIPELINE), &pipeline)?;
    write_text(&out.join("metrics.csv"), &metrics_csv(&history))?;
    write_text(
        &out.join("metrics_by_stage.csv"),
        &metrics_by_stage_csv(&history, &taxonomy),
    )?;
    write_text(&out.join("config.toml"), &config::to_toml(&cfg))?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        config_path: rel(&args.config),
        data_dir: rel(&args.data),
        rules_path: rules_path.as_deref().map(rel),
        train_scenes: data.train.iter().map(|s| s.name.clone()).collect(),
        val_scenes: val_names.iter().map(|s| s.to_string()).collect(),
        test_scenes: data.test.clone(),
        iterations: entries,
        best_iteration: pipeline.best_iteration,
        pipeline: PIPELINE.into(),
        metrics: "metrics.csv".into(),
        metrics_by_stage: "metrics_by_stage.csv".into(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    let best = &history[pipeline.best_iteration - 1];
    println!(
        "best iteration {} of {}: stage1 OA {:.4}, stage2 OA {:.4}, stage2 mIOU {:.4}",
        pipeline.best_iteration,
        history.len(),
        best.stage1.oa,
        best.stage2.oa,
        best.stage2.miou
    );
    Ok(())
}

fn write_iteration(
    out: &Path,
    a: &IterationArtifacts<'_, f64>,
    val_names: &[&str],
    taxonomy: &Taxonomy,
) -> cbf_core::Result<IterationEntry> {
    let dir_name = format!("iter_{:02}", a.record.iteration);
    let dir = out.join(&dir_name);
    let checkpoint = format!("{dir_name}/params.json");
    write_json(&out.join(&checkpoint), a.params)?;
    let mut entry = IterationEntry {
        iteration: a.record.iteration,
        checkpoint,
        label_maps: Vec::new(),
        extra_channels: Vec::new(),
        logs: Vec::new(),
    };
    for (r, name) in a.val.iter().zip(val_names) {
        for (stage, labels) in [("stage1", &r.stage1), ("stage2", &r.stage2)] {
            let f = format!("{name}.{stage}.png");
            write_label_png(&dir.join(&f), labels)?;
            entry.label_maps.push(format!("{dir_name}/{f}"));
        }
        let f = format!("{name}.extra.cbft");
        write_tensor(&dir.join(&f), &extra_to_tensor(&r.extra))?;
        entry.extra_channels.push(format!("{dir_name}/{f}"));
        let f = format!("{name}.corrections.csv");
        write_text(&dir.join(&f), &correction_log_csv(&r.log, taxonomy))?;
        entry.logs.push(format!("{dir_name}/{f}"));
    }
    Ok(entry)
}

pub fn metrics_csv(history: &[IterationRecord]) -> String {
    let mut s = String::from(
        "iteration,stage1_oa,stage1_miou,stage2_oa,stage2_miou,corrections,train_loss\n",
    );
    for r in history {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{},{:.6}\n",
            r.iteration,
            r.stage1.oa,
            r.stage1.miou,
            r.stage2.oa,
            r.stage2.miou,
            r.corrections,
            r.train_loss
        ));
    }
    s
}

/// Header of a per-class metrics table.
pub fn metrics_header(first: &str, taxonomy: &Taxonomy) -> String {
    let mut s = format!("{first},oa,miou");
    for c in taxonomy.classes() {
        s.push_str(&format!(",iou_{}", c.name));
    }
    s.push('\n');
    s
}

/// One metrics row; IoUs of absent classes are left empty.
pub fn metrics_row(key: &str, m: &Metrics) -> String {
    let mut s = format!("{key},{:.6},{:.6}", m.oa, m.miou);
    for v in &m.per_class_iou {
        match v {
            Some(x) => s.push_str(&format!(",{x:.6}")),
            None => s.push(','),
        }
    }
    s.push('\n');
    s
}

fn metrics_by_stage_csv(history: &[IterationRecord], taxonomy: &Taxonomy) -> String {
    let mut s = String::from("iteration,");
    s.push_str(&metrics_header("stage", taxonomy));
    for r in history {
        for (stage, m) in [("1", &r.stage1), ("2", &r.stage2)] {
            s.push_str(&format!("{},", r.iteration));
            s.push_str(&metrics_row(stage, m));
        }
    }
    s
}
