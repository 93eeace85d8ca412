//! `clex`: reproducible experiments on the cluster expansion of maximally
//! chaotic gas states.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clex::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "clex", version, about = "Cluster-expansion experiments: enumeration audits, Ursell functions, cumulants, cluster lengths, series, decay bounds and GCMC")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out/<subcommand>`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Overrides the scale parameter (replaces any sweep).
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Graph, tree and partition enumeration audits.
    Counts {
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
    /// Ursell values by graph sum and recursion, with tree-graph checks.
    Ursell {
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Truncate or untruncate a subset table.
    Cumulant {
        /// JSON table keyed by decimal subset masks.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Random table on `j` points instead of a file.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, value_enum, default_value_t = CumulantMode::Roundtrip)]
        mode: CumulantMode,
    },
    /// Steiner length bracket and connection counts of a point set.
    Length {
        /// Points as `x,y;x,y;...`.
        #[arg(long)]
        points: String,
        #[arg(long, value_enum, default_value_t = EffortArg::ExactSmall)]
        effort: EffortArg,
        #[arg(long, value_enum, default_value_t = ConnectionArg::Edge)]
        connection: ConnectionArg,
    },
    /// Log-partition and correlation series.
    Series {
        #[arg(long, value_enum, default_value_t = RouteArg::Cumulant)]
        route: RouteArg,
    },
    /// Both sides of the truncated-correlation decay bound.
    VerifyTheorem,
    /// Grand-canonical Monte Carlo with estimator grids and oracle cross-check.
    Gcmc,
    /// Smallest `A'` on a grid satisfying the factorial bound.
    FitA {
        #[arg(long, default_value_t = 40)]
        j_max: usize,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Stability constant.
        #[arg(long = "stability-b", default_value_t = 0.0)]
        b: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CumulantMode {
    Truncate,
    Untruncate,
    Roundtrip,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffortArg {
    Bracket,
    Optimize,
    ExactSmall,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectionArg {
    Edge,
    BallOverlap,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouteArg {
    Cumulant,
    PsiOverZ,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Counts { .. } => "counts",
            Command::Ursell { .. } => "ursell",
            Command::Cumulant { .. } => "cumulant",
            Command::Length { .. } => "length",
            Command::Series { .. } => "series",
            Command::VerifyTheorem => "verify-theorem",
            Command::Gcmc => "gcmc",
            Command::FitA { .. } => "fit-a",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_guard() {
        EXIT_GUARD
    } else if e.is_config() || matches!(e, Error::Invalid(_)) {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed; see the output tables");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
