//! `matcol`: generate low-rank test matrices, sample them, complete them,
//! inspect their coherence and run the sample-complexity experiments.
//!
//! Exit status: 0 on success, 2 for usage, configuration or input-format
//! errors, 3 when the computation fails numerically (for example a singular
//! per-column system without `--regularize`), 1 when writing output fails.

mod commands;
mod error;
mod formats;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matcol::ObservationMode;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "matcol", version, about = "Low-rank matrix completion from sampled columns and entries")]
struct Cli {
    /// Worker threads for parallel work; defaults to the available parallelism.
    #[arg(long, global = true, env = "MATCOL_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a Gaussian-factor low-rank matrix, optionally with Gaussian noise.
    Generate(GenerateArgs),
    /// Sample full columns and per-column entries of a matrix.
    Observe(ObserveArgs),
    /// Recover a matrix from sampled columns and entries.
    Complete(CompleteArgs),
    /// Print the coherence measures of a matrix.
    Incoherence(IncoherenceArgs),
    /// Run a sample-complexity or comparison experiment.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub rank: usize,
    /// Noise standard deviation; with a positive value the clean part is
    /// written next to the output as `<stem>.clean.<ext>`.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output matrix (`.csv`, or `.bin` for the binary format).
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<ObservationMode, String> {
    s.parse().map_err(|e: matcol::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct SamplingArgs {
    /// Number of full-column draws.
    #[arg(long, conflicts_with = "auto_thresholds")]
    pub d: Option<usize>,
    /// Entries sampled in every other column.
    #[arg(long, conflicts_with = "auto_thresholds")]
    pub s: Option<usize>,
    /// Take d and s from the exact-recovery thresholds for the input matrix
    /// (d is capped at the column count).
    #[arg(long)]
    pub auto_thresholds: bool,
    /// Failure probability used by --auto-thresholds.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// aligned: one row set shared by all partial columns; independent: a
    /// fresh row set per column.
    #[arg(long, default_value = "independent", value_parser = parse_mode)]
    pub mode: ObservationMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ObserveArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Target rank; needed only by --auto-thresholds.
    #[arg(long)]
    pub rank: Option<usize>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Output observation set (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompleteArgs {
    /// Full matrix to sample from (requires --d/--s or --auto-thresholds).
    #[arg(long, required_unless_present = "observations", conflicts_with = "observations")]
    pub matrix: Option<PathBuf>,
    /// Observation set written by `observe`.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Ground truth for the error report; defaults to --matrix when given.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub rank: usize,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Retry singular per-column systems with Tikhonov regularization.
    #[arg(long)]
    pub regularize: bool,
    /// Regularization used by --regularize; defaults to 1e-10 s/m.
    #[arg(long, requires = "regularize")]
    pub regularization: Option<f64>,
    /// Relative singular-value cut-off for the rank of the column sample.
    #[arg(long, default_value_t = matcol::completion::DEFAULT_RANK_TOLERANCE)]
    pub rank_tolerance: f64,
    /// Output matrix; the report goes to `<stem>.report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IncoherenceArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub rank: usize,
    /// Also estimate the column space from d uniformly drawn columns and
    /// report its coherence.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include the coherence of every column.
    #[arg(long)]
    pub per_column: bool,
    /// Also write the profile to this JSON file (with a manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Minimal d and s for exact recovery over a grid of sizes and ranks.
    ExactRecovery(SweepArgs),
    /// Completion against Nystrom at equal budgets on noisy matrices.
    LowrankCompare(CompareArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// JSON sweep specification; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative error that counts as exact recovery.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<ObservationMode>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// JSON comparison specification; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Values of d (s = d); defaults to r(r+1)/2 and r(r+1), capped below n.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Observe(a) => commands::observe(&a),
        Command::Complete(a) => commands::complete(&a, cli.jobs),
        Command::Incoherence(a) => commands::incoherence(&a),
        Command::Experiment(ExperimentCommand::ExactRecovery(a)) => commands::exact_recovery(&a, cli.jobs),
        Command::Experiment(ExperimentCommand::LowrankCompare(a)) => commands::lowrank_compare(&a, cli.jobs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_kind() as u8)
        }
    }
}
