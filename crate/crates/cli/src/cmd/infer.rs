use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use cbf_core::io::{correction_log_csv, read_image, read_json, write_label_png, write_text};
use cbf_core::{Image, Pipeline};

use crate::cmd::train::PIPELINE;
use crate::failure::{CliResult, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Trained pipeline file, or a run directory containing one.
    #[arg(long)]
    pub pipeline: PathBuf,
    /// Input image: a CBFT tensor or an RGB PNG.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Which label maps to write.
    #[arg(long, value_enum, default_value_t = Stage::Both)]
    pub stage: Stage,
}

pub fn load_pipeline(path: &Path) -> CliResult<Pipeline> {
    let file = if path.is_dir() {
        path.join(PIPELINE)
    } else {
        path.to_path_buf()
    };
    let p: Pipeline =
        read_json(&file).map_err(|e| Failure::Data(format!("cannot load pipeline: {e}")))?;
    p.validate()
        .map_err(|e| Failure::Data(format!("{}: invalid pipeline: {e}", file.display())))?;
    Ok(p)
}

pub fn run(args: &InferArgs) -> CliResult<()> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let image: Image = read_image(&args.image)?;
    let result = pipeline.infer(&image)?;
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    if args.stage != Stage::Two {
        write_label_png(&out.join("stage1.png"), &result.stage1)?;
    }
    if args.stage != Stage::One {
        write_label_png(&out.join("stage2.png"), &result.stage2)?;
        write_text(
            &out.join("corrections.csv"),
            &correction_log_csv(&result.log, &pipeline.taxonomy),
        )?;
    }
    log::info!("{} units corrected", result.log.len());
    Ok(())
}
