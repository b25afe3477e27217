//! Command-line front end: simulate tumbling runs, recover saturated gyro
//! measurements, and evaluate against ground truth.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "gyrosat",
    version,
    about = "Angular-velocity recovery under gyroscope saturation",
    long_about = "Simulates rigid-body tumbling runs with clipped gyroscope \
measurements, reconstructs the saturated axis from accelerometer data, \
smooths the fused signal with a motion prior, and reports error statistics \
against ground truth."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a tumbling run: measurement and truth CSVs plus a manifest.
    Simulate(SimulateArgs),
    /// Detect saturation windows, recover the clipped axis, and smooth.
    Estimate(EstimateArgs),
    /// Compare estimates and raw measurements against ground truth.
    Evaluate(EvaluateArgs),
    /// Run simulate, estimate, and evaluate over a batch of seeded runs.
    Batch(BatchArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario config file (flat `key = value`); defaults used if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator and noise seed; overrides any seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Input measurements CSV (`t,gx,gy,gz,ax,ay,az`).
    #[arg(long)]
    pub measurements: PathBuf,
    /// Rig config file (flat `key = value`); defaults used if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: PathBuf,
    /// Freeze the rotation axis at window entry instead of per-sample
    /// tracking.
    #[arg(long)]
    pub frozen_axis: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Estimates CSV; a measurements CSV is also accepted (raw-only mode).
    #[arg(
        long,
        required_unless_present = "runs_dir",
        conflicts_with = "runs_dir"
    )]
    pub estimates: Option<PathBuf>,
    /// Ground-truth CSV (`t,wx,wy,wz`).
    #[arg(
        long,
        required_unless_present = "runs_dir",
        conflicts_with = "runs_dir"
    )]
    pub truth: Option<PathBuf>,
    /// Saturation windows CSV (`axis,t_start,t_end`).
    #[arg(
        long,
        required_unless_present = "runs_dir",
        conflicts_with = "runs_dir"
    )]
    pub windows: Option<PathBuf>,
    /// Raw measurements CSV for the baseline; when omitted, the estimates
    /// input is compared against itself (zero reduction).
    #[arg(long, conflicts_with = "runs_dir")]
    pub measurements: Option<PathBuf>,
    /// Evaluate every run directory under this directory (batch layout).
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: PathBuf,
    /// Lead the text report with the pooled aggregate (default).
    #[arg(long, conflicts_with = "per_run")]
    pub pooled: bool,
    /// Lead the text report with the median of per-run medians.
    #[arg(long)]
    pub per_run: bool,
    /// Also write plot-data CSVs (truth/raw/smoothed with 3-sigma band).
    #[arg(long)]
    pub plot_data: bool,
    /// Use the 3-vector norm error instead of the saturated-axis error.
    #[arg(long)]
    pub vector_norm: bool,
}

#[derive(Args)]
pub struct BatchArgs {
    /// Shared scenario + rig config file; defaults used if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; run k uses seed + k.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of runs.
    #[arg(long, default_value_t = 32)]
    pub runs: usize,
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: PathBuf,
    /// Freeze the rotation axis at window entry.
    #[arg(long)]
    pub frozen_axis: bool,
    /// Lead the text report with the pooled aggregate (default).
    #[arg(long, conflicts_with = "per_run")]
    pub pooled: bool,
    /// Lead the text report with the median of per-run medians.
    #[arg(long)]
    pub per_run: bool,
    /// Also write per-run plot-data CSVs.
    #[arg(long)]
    pub plot_data: bool,
}

/// Usage errors exit 1, data errors exit 2.
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<gyrosat::Error> for CliError {
    fn from(e: gyrosat::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Estimate(args) => commands::estimate(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Batch(args) => commands::batch(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
