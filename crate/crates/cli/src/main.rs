use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

use rademacher::REFINED_P;

#[derive(Parser, Debug)]
#[command(
    name = "rademacher",
    version,
    about = "Concentration of Rademacher sums: exact probabilities and certified bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Arithmetic for weights and thresholds.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Rational)]
    mode: Mode,

    /// Event threshold t in |S| ≤ t. Decimal or p/q.
    #[arg(long, global = true, default_value = "1", allow_hyphen_values = true)]
    threshold: String,

    /// Use |S| < t instead of |S| ≤ t.
    #[arg(long, global = true)]
    strict: bool,

    /// Moment exponent for `moments` and for the G bound.
    #[arg(long, global = true, default_value_t = REFINED_P)]
    p: f64,

    /// Worker threads. Defaults to available parallelism.
    #[arg(long, global = true, env = "RADEMACHER_THREADS")]
    threads: Option<NonZeroUsize>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    output: Format,

    /// Weight-list file. Reads stdin when absent.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Pr[|S| ≤ t] for each instance.
    Prob,
    /// Full distribution of S.
    Dist,
    /// Second, fourth and p-th moments with the Khintchine and Chebyshev bounds.
    Moments,
    /// Law of the stopping time and per-branch success probabilities.
    Stopping,
    /// Certified lower bound on Pr[|S| ≤ 1] next to the exact value.
    Certify {
        /// Also average the branch bounds over the exact law of T.
        #[arg(long)]
        diagnostic: bool,
        /// `g` uses the p-th moment bound with `--p` (experimental).
        #[arg(long, value_enum, default_value_t = Bound::F)]
        bound: Bound,
    },
    /// Run every check behind the main theorem.
    VerifyTheorem {
        #[arg(long, default_value_t = 60)]
        k_max: usize,
        /// Random instances in the soundness sweep.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Search for weights minimizing Pr[|S| ≤ 1].
    Search {
        #[arg(long, value_enum, default_value_t = SearchMethod::Pattern)]
        method: SearchMethod,
        #[arg(long)]
        n: usize,
        /// Grid resolution for `--method grid`.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Write the (evaluation, prob) trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prob => "prob",
            Command::Dist => "dist",
            Command::Moments => "moments",
            Command::Stopping => "stopping",
            Command::Certify { .. } => "certify",
            Command::VerifyTheorem { .. } => "verify-theorem",
            Command::Search { .. } => "search",
        }
    }
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Rational,
    Float,
}

#[derive(ValueEnum, Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Bound {
    F,
    G,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SearchMethod {
    Grid,
    Pattern,
}

/// Echoed at the top of every report.
#[derive(Serialize, Debug, Clone)]
struct RunConfig {
    command: &'static str,
    input_path: Option<PathBuf>,
    mode: Mode,
    threshold: String,
    strict: bool,
    p: f64,
    threads: usize,
    seed: u64,
    output: Format,
}

enum Failure {
    /// Bad input or arguments; exit 2.
    Invalid(String),
    /// A check ran and failed; exit 1. The report has already been printed.
    Verification,
}

impl From<rademacher::Error> for Failure {
    fn from(e: rademacher::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.get())
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
