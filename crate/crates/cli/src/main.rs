//! `stereo-aware` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O, 2 validation, 3 every batch row failed.

mod analyze;
mod evaluate;
mod failure;
mod loss;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "stereo-aware", version, about = "Stereo image analysis, loss evaluation and scene synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-band IID, IPD and IC of a stereo file, plus OPD against a reference.
    Analyze(AnalyzeArgs),
    /// Loss breakdown of an estimate against a reference.
    Loss(LossArgs),
    /// Synthesize reverberant noisy scenes and a manifest.
    Synth(SynthArgs),
    /// Evaluate estimates listed by a manifest.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    input: PathBuf,
    /// Reference file; adds OPD of the input against it.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Number of equal-width bands.
    #[arg(long, default_value_t = 32)]
    bands: usize,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Duplicate mono input to both channels.
    #[arg(long)]
    upmix: bool,
}

#[derive(Args, Debug)]
struct LossArgs {
    reference: PathBuf,
    estimate: PathBuf,
    /// JSON loss configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also compare the analytic gradient with central differences on a short segment.
    #[arg(long)]
    grad_check: bool,
    #[arg(long)]
    upmix: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// train, test1 or test2.
    #[arg(long, default_value = "train")]
    preset: String,
    /// Utterance length in seconds.
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("method").required(true).args(["est", "oracle"])))]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<id>.wav` estimates.
    #[arg(long)]
    est: Option<PathBuf>,
    /// Label for the `--est` method in the report.
    #[arg(long, default_value = "estimate")]
    label: String,
    /// Evaluate the known-noise Wiener oracle instead of stored estimates.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 32)]
    bands: usize,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV report path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(a) => analyze::run(a),
        Command::Loss(a) => loss::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Eval(a) => evaluate::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("stereo-aware: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
