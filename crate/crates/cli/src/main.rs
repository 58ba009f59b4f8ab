use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod error;
mod io;
mod report;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "hetreg", version, about = "Robust heterogeneity regression with overlapping group penalties")]
struct Cli {
    /// Worker threads for multi-start fits (default: available parallelism).
    #[arg(long, global = true, env = "HETREG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit K subgroup models (or select K by BIC with --k-min/--k-max).
    Fit(FitArgs),
    /// Fit every K in a range and keep the BIC minimizer.
    SelectK(FitArgs),
    /// Generate a simulated dataset with its cluster file and truth.
    Simulate(SimulateArgs),
    /// Score labels and coefficients against a truth or another labeling.
    Evaluate(EvaluateArgs),
    /// Assign test samples to subgroups and predict their responses.
    Predict(PredictArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Huber,
    Squared,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureArg {
    Clusters,
    Lasso,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    /// CSV with a header; column `y` is the response, `id` an optional sample id.
    #[arg(long)]
    pub data: PathBuf,
    /// Cluster file, one `name: j1,j2,...` line per cluster (1-based). Absent: all singletons.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    #[arg(long, value_enum, default_value_t = LossArg::Huber)]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value_t = StructureArg::Clusters)]
    pub structure: StructureArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop once the objective changes by less than this between iterations.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub intercept: bool,
    /// Fixed penalty level instead of cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Mixing weight used with --lambda.
    #[arg(long, default_value_t = 0.5, requires = "lambda")]
    pub gamma: f64,
    /// Fixed Huber threshold instead of the adaptive rule.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 20)]
    pub n_lambdas: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// s1..s6 or lowdim10, lowdim20, lowdim32, lowdim50.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// balanced, unbalanced or three.
    #[arg(long, default_value = "balanced")]
    pub balance: String,
    /// t1, mix or gauss.
    #[arg(long, default_value = "gauss")]
    pub error: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvaluateArgs {
    /// Labels to score (sample_id, subgroup).
    #[arg(long)]
    pub labels: PathBuf,
    /// Fitted model, needed for support and coefficient metrics.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// A second labeling (possibly of a subsample) for NMI and stability.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// Test CSV; must contain `y`, which decides each sample's subgroup.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Fit(a) => commands::fit(&a, false, threads),
        Command::SelectK(a) => commands::fit(&a, true, threads),
        Command::Simulate(a) => commands::simulate(&a, threads),
        Command::Evaluate(a) => commands::evaluate(&a, threads),
        Command::Predict(a) => commands::predict(&a, threads),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
