//! `ibgas`: information-bottleneck curves from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "ibgas", version, about = "Relevance-compression curves by generalized alternating Sinkhorn")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a sweep of thresholds (or BA multipliers) and emit one row each.
    Curve(CurveArgs),
    /// Solve one threshold and print the report as JSON.
    Point(PointArgs),
    /// Evaluate a closed-form curve.
    Oracle(OracleArgs),
    /// Time GAS against the BA slope search.
    Bench(BenchArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Bernoulli,
    Gaussian,
    ConstantSlope,
    Empirical,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value = "bernoulli")]
    pub problem: ProblemKind,
    /// Flip probability of the binary channel.
    #[arg(long, default_value_t = 0.15)]
    pub e: f64,
    #[arg(long, default_value_t = 1.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 10.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 0.2)]
    pub step: f64,
    /// Comma-separated samples for the empirical problem.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Zero-based label column; defaults to the last column.
    #[arg(long)]
    pub label_col: Option<usize>,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gas,
    Ba,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "gas")]
    pub solver: SolverKind,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cardinality of T; defaults to |X|.
    #[arg(long)]
    pub bottleneck: Option<usize>,
    /// Disable the log-domain kernel.
    #[arg(long)]
    pub unstabilized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Nats,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long, value_enum, default_value = "nats")]
    pub units: Units,
    /// Output file; a `<out>.manifest.json` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, requires_all = ["i_max", "i_steps"], conflicts_with = "i_list")]
    pub i_min: Option<f64>,
    #[arg(long, requires = "i_min")]
    pub i_max: Option<f64>,
    #[arg(long, requires = "i_min")]
    pub i_steps: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub i_list: Option<Vec<f64>>,
    /// BA multipliers as `lo:hi:n`.
    #[arg(long, conflicts_with_all = ["i_min", "i_list"])]
    pub beta_sweep: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub i: f64,
    #[arg(long, value_enum, default_value = "nats")]
    pub units: Units,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleModel {
    Bernoulli,
    Gaussian,
    ConstantSlope,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub model: OracleModel,
    #[arg(long, default_value_t = 0.15)]
    pub e: f64,
    #[arg(long, default_value_t = 1.0)]
    pub snr: f64,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub i_list: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub target_i_list: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&args);
    match commands::run(cli.command, &args[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ibgas: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
