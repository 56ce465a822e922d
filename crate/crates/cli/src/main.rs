//! `cbf`: train, run and evaluate the closed-loop segmentation refiner.
//!
//! Exit status: 0 success, 1 configuration error, 2 data error, 3 training
//! divergence.

mod cmd;
mod config;
mod dataset;
mod failure;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::{CliResult, Failure};

#[derive(Parser, Debug)]
#[command(
    name = "cbf",
    version,
    about = "Closed-loop land-cover segmentation with rule-based refinement"
)]
struct Cli {
    /// Worker threads for per-image work; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the classifier/reasoner loop on a scene directory.
    Train(cmd::train::TrainArgs),
    /// Two-stage inference on one image with a trained pipeline.
    Infer(cmd::infer::InferArgs),
    /// Correct an external probability map with the rules alone.
    Refine(cmd::refine::RefineArgs),
    /// Score label rasters against ground truth.
    Eval(cmd::eval::EvalArgs),
    /// Render a synthetic benchmark.
    Synth(cmd::synth::SynthArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::config)?;
    }
    match &cli.command {
        Command::Train(a) => cmd::train::run(a),
        Command::Infer(a) => cmd::infer::run(a),
        Command::Refine(a) => cmd::refine::run(a),
        Command::Eval(a) => cmd::eval::run(a),
        Command::Synth(a) => cmd::synth::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cbf: {f}");
            f.exit_code()
        }
    }
}
