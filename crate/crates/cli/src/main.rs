//! Command-line workflows for partial-identification sensitivity analysis:
//! simulate benchmark data, inspect the treatment spectrum, compute bias
//! bounds over a confounding grid, run the posterior samplers, and check the
//! direction-prior bias law.

mod commands;
mod errors;
mod io;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "partialid",
    version,
    about = "Partial-identification bounds and sensitivity analysis for multi-treatment data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset with known ground truth.
    Simulate(SimulateArgs),
    /// Eigenvalue spectrum of the treatment covariance, for rank choice.
    Scree(ScreeArgs),
    /// Bias bounds and causal-effect intervals over a confounding grid.
    Bounds(BoundsArgs),
    /// Posterior sampling under a chosen prior regime.
    Sample(SampleArgs),
    /// Monte Carlo check of the direction-prior bias law.
    BiasPrior(BiasPriorArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    NullEffects,
    NoConfounding,
    OppositeBias,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RegimeArg {
    FlatGamma,
    R2Uniform,
    NegativeControl,
    Horseshoe,
    HorseshoeNc,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Number of observations.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Number of treatments.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Fraction of residual outcome variance explained by confounders.
    #[arg(long, default_value_t = 0.5)]
    r2: f64,
    /// Which ground truth generates the observed distribution.
    #[arg(long, value_enum, default_value_t = VariantArg::NullEffects)]
    variant: VariantArg,
    /// Baseline causal effects, comma separated (default all zero).
    #[arg(long, value_delimiter = ',')]
    beta_true: Option<Vec<f64>>,
    /// JSON file with an explicit loading matrix (k rows of m numbers).
    #[arg(long)]
    loadings: Option<PathBuf>,
    /// Confounder count; required with --loadings, otherwise 2.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScreeArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Outcome column to drop before the spectrum, if present.
    #[arg(long)]
    outcome_col: Option<String>,
    /// Scale columns to unit standard deviation first.
    #[arg(long, default_value_t = false)]
    standardize: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct BoundsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    outcome_col: String,
    /// Confounder count for the factor fit.
    #[arg(long)]
    m: usize,
    /// Confounding fractions to evaluate (repeatable); default grid 0 to 1
    /// in steps of 0.1.
    #[arg(long = "r2")]
    r2: Vec<f64>,
    /// JSON file of contrasts to evaluate.
    #[arg(long)]
    contrasts: PathBuf,
    /// JSON file of negative controls.
    #[arg(long)]
    nc_spec: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    standardize: bool,
    /// Compatibility tolerance for estimated control effects.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    outcome_col: String,
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum)]
    regime: RegimeArg,
    /// Total iterations per chain.
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Warmup iterations discarded per chain (default: half of --iters).
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upper bound of the uniform prior on the confounding fraction.
    #[arg(long, default_value_t = 1.0)]
    r2_upper: f64,
    /// JSON file of negative controls (treatment indices).
    #[arg(long)]
    nc_spec: Option<PathBuf>,
    /// Global scale of the shrinkage prior (default from a 10% non-null
    /// fraction).
    #[arg(long)]
    horseshoe_scale: Option<f64>,
    /// Slab scale of the shrinkage prior.
    #[arg(long, default_value_t = 2.0)]
    horseshoe_slab: f64,
    #[arg(long, default_value_t = false)]
    standardize: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct BiasPriorArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    outcome_col: String,
    #[arg(long)]
    m: usize,
    /// Confounding fraction of the sampled bias law.
    #[arg(long, default_value_t = 0.5)]
    r2: f64,
    /// JSON file of contrasts to evaluate.
    #[arg(long)]
    contrasts: PathBuf,
    /// Monte Carlo draws per contrast.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    standardize: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Scree(args) => commands::scree::run(args),
        Command::Bounds(args) => commands::bounds::run(args),
        Command::Sample(args) => commands::sample::run(args),
        Command::BiasPrior(args) => commands::bias_prior::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
