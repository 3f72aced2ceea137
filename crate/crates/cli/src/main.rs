//! `halfspace-active`: runs, label-complexity curves, verification suites and
//! budget tables for the epoch-based active learner.
//!
//! Exit status is 0 on success, 1 when a run or check fails, 2 for usage and
//! configuration errors.

mod commands;
mod config;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "halfspace-active", version, about = "Epoch-based active learning of halfspaces")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    /// Config override, e.g. `--set schedule.n=200`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the active learner once per seed and write run_records.json.
    Run(Common),
    /// Active against passive labels per accuracy target; writes curve.csv.
    Curve(Common),
    /// Run the verification suites and write checks.csv.
    Check {
        #[command(flatten)]
        common: Common,
        /// Only these suites (equivalence, psi, lemma, gradient, gap).
        #[arg(long, value_name = "NAME", value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Print the ψ-transform of a loss as CSV.
    PsiTable {
        /// exponential, truncated-quadratic or logistic.
        #[arg(long)]
        loss: String,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Evaluate the label budget formulas.
    Budget {
        #[command(flatten)]
        common: Common,
        /// Target accuracy for the total-label bound.
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    let result = match cli.command {
        Command::Run(common) => commands::run(&common),
        Command::Curve(common) => commands::curve(&common),
        Command::Check { common, only } => commands::check(&common, &only),
        Command::PsiTable { loss, step } => commands::psi_table(&loss, step),
        Command::Budget { common, epsilon } => commands::budget(&common, epsilon),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
