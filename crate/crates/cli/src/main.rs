//! `pyrofield`: exact computation, simulation, sweeps and self-checks for the
//! directed forest-fire field.

mod commands;
mod error;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

pub const THREADS_ENV: &str = "PYROFIELD_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "pyrofield",
    version,
    about = "Directed forest-fire random field: exact laws, Monte Carlo, sweeps"
)]
struct Cli {
    /// Worker threads [default: hardware parallelism; env PYROFIELD_THREADS]. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact law of diagonal n: E[Z_n] and the pmf of Y_n as JSON.
    Exact(ExactArgs),
    /// Monte Carlo replicas; writes traces (.csv) or per-diagonal stats (.json).
    Simulate(SimulateArgs),
    /// Resumable sweep over the admissible (alpha, beta, gamma) grid.
    Sweep(SweepArgs),
    /// One-dimensional model: closed forms against simulation.
    Oned(OnedArgs),
    /// Within-path Cauchy diagnostics for Z_n at doubling checkpoints.
    Converge(ConvergeArgs),
    /// Run the built-in cross-check suite; exit 0 iff every check passes.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Burn probability with only the left neighbour (j-1, k) burnt.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Burn probability with only the bottom neighbour (j, k-1) burnt.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub beta: f64,
    /// Burn probability with both neighbours burnt; needs alpha, beta <= gamma <= min(1, alpha + beta).
    #[arg(long, default_value_t = 0.75, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Comma-separated j with S(j, -1) = 1 ("" for none).
    #[arg(long, default_value = "0")]
    pub fire_x: String,
    /// Comma-separated k with S(-1, k) = 1 ("" for none).
    #[arg(long, default_value = "0")]
    pub fire_y: String,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Diagonal index.
    #[arg(long)]
    pub n: usize,
    /// Largest diagonal the forward recursion may reach.
    #[arg(long, default_value_t = pyrofield::exact::DEFAULT_N_MAX_EXACT)]
    pub n_max_exact: usize,
    /// Largest triangle for the brute-force cross-check (run automatically when n <= this).
    #[arg(long, default_value_t = pyrofield::exact::DEFAULT_N_MAX_ENUM)]
    pub n_max_enum: usize,
    /// Also write the full diagonal law as CSV (config_index,probability).
    #[arg(long)]
    pub csv: Option<std::path::PathBuf>,
    /// JSON report path [default: stdout].
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Last diagonal to simulate.
    #[arg(long, default_value_t = 1000)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1000)]
    pub replicas: u64,
    /// Master seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Diagonals to report, n0:n1 or n0:n1:stride [default: 0:n_max].
    #[arg(long)]
    pub record: Option<String>,
    /// Output file; .csv gives traces (replica_id,n,y,z), .json gives stats [default: stats JSON on stdout].
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Keep simulating after extinction instead of filling zeros.
    #[arg(long)]
    pub no_early_stop: bool,
    /// Print site updates and throughput to stderr.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid points per axis of [0, 1]^3 (>= 2).
    #[arg(long, default_value_t = 11)]
    pub resolution: usize,
    /// Checkpoint diagonal at which each cell is summarised.
    #[arg(long, default_value_t = 1000)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1000)]
    pub replicas: u64,
    /// Master seed (required); shared by every cell.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV store (alpha,beta,gamma,checkpoint,mean_z,var_z,extinct_frac,replicas,seed).
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Reuse matching rows already in the output file.
    #[arg(long)]
    pub resume: bool,
    /// Comma-separated j with S(j, -1) = 1.
    #[arg(long, default_value = "0")]
    pub fire_x: String,
    /// Comma-separated k with S(-1, k) = 1.
    #[arg(long, default_value = "0")]
    pub fire_y: String,
}

#[derive(Debug, Args)]
pub struct OnedArgs {
    /// Probability that fire passes to the next tree.
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
    #[arg(long, default_value_t = 100_000)]
    pub replicas: u64,
    /// Seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report P{Y >= n} for n = 1..=max_tail.
    #[arg(long, default_value_t = 20)]
    pub max_tail: u64,
    /// JSON report path [default: stdout].
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// First checkpoint of the doubling schedule.
    #[arg(long, default_value_t = pyrofield::analysis::DEFAULT_FIRST_CHECKPOINT)]
    pub first: usize,
    /// Last checkpoint; the schedule doubles from --first up to this.
    #[arg(long, default_value_t = pyrofield::analysis::DEFAULT_LAST_CHECKPOINT)]
    pub last: usize,
    /// Explicit strictly increasing checkpoints, overriding --first/--last.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    /// Thresholds for |Z_m' - Z_m|.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.02,0.01")]
    pub epsilons: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: u64,
    /// Master seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path [default: stdout].
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Seed for the randomised checks.
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Exact(a) => commands::exact(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Oned(a) => commands::oned(a),
        Command::Converge(a) => commands::converge(a),
        Command::Verify(a) => commands::verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    return CliError::usage("missing subcommand; see --help").report();
                }
                _ => {}
            }
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return CliError::usage(first).report();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
