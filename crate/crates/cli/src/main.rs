//! `goldssr`: sample sizes, inflation factors and simulation runs for three-arm
//! gold standard non-inferiority trials.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::{AnalyticArgs, SimArgs, Target};
use goldssr::estimators::Estimator;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "goldssr", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Approximate power of the global test at a given total size
    Power {
        /// Total sample size
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        args: AnalyticArgs,
    },
    /// Smallest total size reaching the target power
    Samplesize {
        #[command(flatten)]
        args: AnalyticArgs,
    },
    /// Inflation factor of the block-sum procedure
    Zeta {
        /// Pilot sizes, comma separated [default: config grid, else 30,60,...,390]
        #[arg(long, value_delimiter = ',')]
        n1: Vec<u64>,
        #[command(flatten)]
        args: AnalyticArgs,
    },
    /// Variance estimates and re-estimated sizes from a pilot data file
    Estimate {
        /// One subject per line: outcome, then optional arm label (E, R, P) and block index
        file: PathBuf,
        /// Estimator (POOLED, OS, OSU, XG); repeatable [default: all the file supports]
        #[arg(long)]
        method: Vec<Estimator>,
        #[command(flatten)]
        args: AnalyticArgs,
    },
    /// Simulate the scenarios of a configuration file, or given scenario ids
    Simulate {
        /// TOML configuration file
        #[arg(long, required_unless_present = "scenario")]
        config: Option<PathBuf>,
        /// Scenario id as printed in a result CSV; repeatable
        #[arg(long)]
        scenario: Vec<String>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Regenerate a published table or figure
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        #[command(flatten)]
        sim: SimArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Power { n, args } => commands::power(args, *n),
        Command::Samplesize { args } => commands::samplesize(args),
        Command::Zeta { n1, args } => commands::zeta(args, n1),
        Command::Estimate { file, method, args } => commands::estimate_file(args, file, method),
        Command::Simulate { config, scenario, sim } => commands::simulate(sim, config.as_deref(), scenario),
        Command::Reproduce { target, sim } => commands::reproduce(sim, *target),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
