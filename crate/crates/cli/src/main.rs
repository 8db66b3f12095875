use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod grids;
mod manifest;
mod output;
mod verify;

/// Correlated Markov quantum walks: evolution, transfer operators, diffusion
/// and deviation spectra.
#[derive(Parser, Debug)]
#[command(name = "mqw", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Model file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Time budget for `verify`; remaining checks are skipped once spent.
    #[arg(long, global = true, default_value_t = 120.0)]
    pub budget_seconds: f64,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Parse and validate a model file.
    Validate,
    /// Position distribution after `n` steps.
    Evolve(EvolveArgs),
    /// Averaged characteristic function by torus quadrature.
    Charfn(CharfnArgs),
    /// Spectrum of the fiber operator and the gap condition.
    Spectrum(SpectrumArgs),
    /// Drift and diffusion matrix.
    Diffusion(GridArgs),
    /// Moderate or large deviation rate function.
    Deviations(DeviationsArgs),
    /// Classical process, Σ routes and empirical CLT for permutation coins.
    Permutation(PermutationArgs),
    /// Characteristic function for coins independent in time.
    Uncorrelated(UncorrelatedArgs),
    /// Run every applicable cross-check on the model.
    Verify,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvolveArgs {
    #[arg(long)]
    pub steps: usize,
    /// Average over this many sampled disorder paths.
    #[arg(long, conflicts_with = "enumerate")]
    pub paths: Option<usize>,
    /// Exact average over all disorder paths.
    #[arg(long)]
    pub enumerate: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CharfnArgs {
    #[arg(long)]
    pub steps: usize,
    /// Comma-separated components of y.
    #[arg(long, allow_hyphen_values = true)]
    pub y: String,
    /// Quadrature points per torus direction; the least admissible by default.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Also evaluate the brute-force average over disorder paths.
    #[arg(long)]
    pub check: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 8)]
    pub p_grid: usize,
    #[arg(long = "check-S")]
    pub check_s: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 8)]
    pub p_grid: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DevMode {
    Moderate,
    Large,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DeviationsArgs {
    #[arg(long, value_enum)]
    pub mode: DevMode,
    /// `lo:hi:count` per coordinate, or points `a,b;c,d`.
    #[arg(long, allow_hyphen_values = true)]
    pub x_grid: String,
    #[arg(long, default_value_t = 8)]
    pub p_grid: usize,
    /// Half-width of the dual search box (moderate mode).
    #[arg(long, default_value_t = 4.0)]
    pub y_box: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PermutationArgs {
    #[arg(long, default_value_t = 1024)]
    pub steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct UncorrelatedArgs {
    #[arg(long)]
    pub steps: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub y: String,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub p_grid: usize,
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use mqw_core::error::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Budget(_)) => EXIT_BUDGET,
        Some(
            E::InvalidModel(_)
            | E::InvalidInput(_)
            | E::GridTooSmall { .. }
            | E::Io(_)
            | E::Json(_),
        ) => EXIT_INPUT,
        Some(_) => EXIT_CHECK_FAILED,
        None => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
