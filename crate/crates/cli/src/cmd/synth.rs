use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use cbf_core::io::{
    image_to_tensor, probmap_to_tensor, read_text, write_label_png, write_preview_png,
    write_tensor, write_text,
};
use cbf_core::synth::{corrupt_probmap, render_scenes, split_indices, CorruptionModel, SceneSpec};
use cbf_core::PipelineConfig;

use crate::config;
use crate::dataset::{
    corrupt_path, image_path, preview_path, scene_name, split_text, truth_path, Part, SPLIT_FILE,
};
use crate::failure::{CliResult, Failure};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of scenes.
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Scene layout file; the built-in benchmark layout when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Also write a corrupted probability map per scene.
    #[arg(long)]
    pub corrupt: bool,
    /// Corruption settings file; defaults apply when omitted.
    #[arg(long, requires = "corrupt")]
    pub corruption: Option<PathBuf>,
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    if args.n == 0 {
        return Err(Failure::Config("--n must be at least 1".into()));
    }
    let template = match &args.spec {
        Some(p) => {
            let text = read_text(p)
                .map_err(|e| Failure::Config(format!("cannot read scene spec: {e}")))?;
            SceneSpec::from_toml(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => SceneSpec::default_benchmark(0),
    };
    template.validate()?;
    let corruption = match &args.corruption {
        Some(p) => {
            let text = read_text(p)
                .map_err(|e| Failure::Config(format!("cannot read corruption model: {e}")))?;
            toml::from_str::<CorruptionModel>(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => CorruptionModel {
            seed: args.seed,
            ..CorruptionModel::default()
        },
    };
    if args.corrupt {
        corruption.validate(template.taxonomy()?.len())?;
    }

    let scenes = render_scenes(&template, args.n, args.seed)?;
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    scenes
        .par_iter()
        .enumerate()
        .try_for_each(|(i, scene)| -> CliResult<()> {
            let name = scene_name(i);
            write_tensor(&image_path(out, &name), &image_to_tensor(&scene.image))?;
            write_label_png(&truth_path(out, &name), &scene.labels)?;
            write_preview_png(&preview_path(out, &name), &scene.image)?;
            if args.corrupt {
                let probs = corrupt_probmap(&scene.labels, &corruption.for_scene(i))?;
                write_tensor(&corrupt_path(out, &name), &probmap_to_tensor(&probs))?;
            }
            Ok(())
        })?;

    let split = split_indices(args.n, args.seed);
    let mut entries: Vec<(String, Part)> = Vec::with_capacity(args.n);
    for (ids, part) in [
        (&split.train, Part::Train),
        (&split.val, Part::Val),
        (&split.test, Part::Test),
    ] {
        entries.extend(ids.iter().map(|&i| (scene_name(i), part)));
    }
    entries.sort();
    write_text(&out.join(SPLIT_FILE), &split_text(&entries))?;
    write_text(&out.join("scene.toml"), &template.to_toml())?;
    let cfg = PipelineConfig {
        seed: args.seed,
        ..PipelineConfig::benchmark()
    };
    write_text(&out.join("cbf.toml"), &config::to_toml(&cfg))?;
    if args.corrupt {
        let text = toml::to_string(&corruption).map_err(Failure::config)?;
        write_text(&out.join("corruption.toml"), &text)?;
    }
    log::info!(
        "wrote {} scenes to {} ({} train / {} val / {} test)",
        args.n,
        out.display(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}
