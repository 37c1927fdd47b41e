//! `bpdn`: command-line front end to the bpdn-core experiments.
//!
//! Every command writes CSV to `--out` or to stdout. Settings resolve as
//! flag, then `--config` file, then built-in default.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::List;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(bpdn_core::Error),
}

impl From<bpdn_core::Error> for CliError {
    fn from(e: bpdn_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) if e.is_numerical() => write!(f, "numerical failure: {e}"),
            CliError::Core(e) => write!(f, "error: {e}"),
        }
    }
}

impl CliError {
    /// 1 for bad input, 2 for a numerical routine that failed.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bpdn",
    version,
    about = "Gibbs sampling experiments for basis pursuit denoising"
)]
pub struct Cli {
    /// Master seed of all random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CSV output file (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Plain-text `key = value` file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for replicates (all cores if absent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Either a problem file or the scalar problem `(y, t)`.
#[derive(Debug, Clone, Default, Args)]
pub struct ProblemArgs {
    /// Problem file: `n p t`, then n rows of A, then the n entries of y.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub y: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
}

/// A temperature, or bias / mean-square targets it is derived from.
#[derive(Debug, Clone, Default, Args)]
pub struct TargetArgs {
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub bias: Option<f64>,
    #[arg(long)]
    pub mse: Option<f64>,
    /// Relative tolerance of the bias/MSE consistency check: `strict`, `reproduction` or a number.
    #[arg(long)]
    pub tolerance: Option<commands::Tolerance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyKind {
    /// KS distance of rescaled scalar chains to their limit laws.
    Ks,
    /// Frequency of negative states on the boundary `y = t`.
    Sign,
    /// Chi-square test of a small problem against its limit density.
    Chi2,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem and print x*, the certificate and the support partition.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Metropolis-Hastings at a fixed temperature.
    Sample {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        sigma2: Option<f64>,
        /// Number of kept states.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thinning: Option<usize>,
        /// `random-walk` or `independence`.
        #[arg(long)]
        proposal: Option<bpdn_core::ProposalKind>,
    },
    /// Simulated annealing with `T_n = 1/(β0 qⁿ)`.
    Anneal {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        beta0: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        /// Number of steps.
        #[arg(long, conflicts_with = "temperature")]
        n: Option<usize>,
        /// Run until the schedule reaches this temperature.
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Score a family of proposal variances with the f1/f2 criteria.
    Criteria {
        /// `interior`, `boundary` or `exterior`.
        #[arg(long)]
        regime: Option<bpdn_core::criteria::CriterionRegime>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        temperature: Option<f64>,
        /// Chain length.
        #[arg(long)]
        n: Option<usize>,
        /// Number of replicates.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        sigma2: Option<List<f64>>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        proposal: Option<bpdn_core::ProposalKind>,
    },
    /// Temperature meeting bias / mean-square targets for the scalar problem.
    Temperature {
        #[arg(long, allow_negative_numbers = true)]
        y: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        bias: Option<f64>,
        #[arg(long)]
        mse: Option<f64>,
        #[arg(long)]
        tolerance: Option<commands::Tolerance>,
        /// Write the interior `T(b,u)`, `T(MSE,u)` and constraint curves instead.
        #[arg(long)]
        emit_curves: bool,
    },
    /// Empirical checks of the low-temperature limits.
    Verify {
        #[arg(long, value_enum, default_value = "ks")]
        kind: VerifyKind,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Strictly decreasing temperatures (`ks`, `sign`).
        #[arg(long)]
        temperatures: Option<List<f64>>,
        /// Temperature of the chi-square test.
        #[arg(long)]
        temperature: Option<f64>,
        /// Kept samples (`ks`, `chi2`) or chain length (`sign`).
        #[arg(long)]
        n: Option<usize>,
        /// Bins per axis of the chi-square test.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Reproduce a table: 1-3 proposal rankings, 4 running averages.
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
        #[arg(long, allow_negative_numbers = true)]
        y: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        bias: Option<f64>,
        #[arg(long)]
        mse: Option<f64>,
        /// Chain length (tables 1-3).
        #[arg(long)]
        n: Option<usize>,
        /// Replicates (tables 1-3).
        #[arg(long)]
        m: Option<usize>,
        /// Proposal variances (tables 1-3) or the single variance (table 4).
        #[arg(long)]
        sigma2: Option<List<f64>>,
        /// Chain lengths reported by table 4.
        #[arg(long)]
        lengths: Option<List<usize>>,
        #[arg(long)]
        tolerance: Option<commands::Tolerance>,
        #[arg(long)]
        proposal: Option<bpdn_core::ProposalKind>,
    },
    /// Metropolis-Hastings at `T(b,MSE)` against annealing with the same budget.
    Compare {
        #[command(flatten)]
        compare: CompareArgs,
    },
    /// CSV data behind a figure.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        id: u8,
        /// Data values (figures 1 and 4).
        #[arg(long, allow_hyphen_values = true)]
        ys: Option<List<f64>>,
        /// Interior ratio `y/t` (figure 3).
        #[arg(long)]
        u: Option<f64>,
        #[command(flatten)]
        compare: CompareArgs,
    },
    /// Limit density of the rescaled Gibbs law at `(fast, slow)` coordinates.
    LimitDensity {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, allow_hyphen_values = true)]
        fast: Option<List<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        slow: Option<List<f64>>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CompareArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub y: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub bias: Option<f64>,
    #[arg(long)]
    pub mse: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<commands::Tolerance>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
