use std::path::PathBuf;

use clap::Args;

use cbf_core::evaluate;
use cbf_core::io::{read_label_png, write_text};

use crate::cmd::train::{metrics_header, metrics_row};
use crate::failure::{CliResult, Failure};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Ground-truth label raster.
    #[arg(long)]
    pub truth: PathBuf,
    /// Predicted label rasters; one output row each.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// CSV file to write; stdout only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let truth = read_label_png(&args.truth)?;
    let mut csv = metrics_header("prediction", truth.taxonomy());
    for p in &args.pred {
        let pred = read_label_png(p)?;
        let m =
            evaluate(&pred, &truth).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
        let key = p.to_string_lossy().replace(',', "_");
        csv.push_str(&metrics_row(&key, &m));
    }
    print!("{csv}");
    if let Some(out) = &args.out {
        write_text(out, &csv)?;
    }
    Ok(())
}
