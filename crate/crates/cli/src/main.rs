//! `hetalloc`: validate, compact, solve, unfold, benchmark and export
//! component-to-hardware allocation problems.
//!
//! Exit codes: 0 success, 1 domain violation (invalid model, infeasible
//! unfolded placement, oracle mismatch), 2 I/O or parse error, 3 no
//! feasible allocation, 4 time limit reached.

mod commands;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hetalloc", version, about = "Two-layer component allocation for CPU-GPU platforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file and print one diagnostic per line on stderr.
    Validate { model: PathBuf },
    /// Compact the architecture of a model file into multi-variant units.
    Compact {
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compute an optimal allocation scheme for a compacted model.
    Solve {
        compacted: PathBuf,
        /// Platform file, or a model file whose platform is used.
        platform: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Objective weights, e.g. `FrontVision=2,BottomVision=1`.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        time_limit_ms: Option<u64>,
        /// Also run the exhaustive oracle and fail on disagreement.
        #[arg(long)]
        oracle: bool,
        /// On timeout, write the best scheme found so far.
        #[arg(long)]
        incumbent: bool,
        /// Visit units in declaration order instead of by demand.
        #[arg(long)]
        declared_order: bool,
    },
    /// Expand a solved scheme into a per-component placement and check it.
    Unfold {
        scheme: PathBuf,
        compacted: PathBuf,
        /// Model file supplying the repository and the platform.
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time naive and two-variant formulations on generated chains.
    Bench {
        /// Chain sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "30")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long)]
        time_limit_ms: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the allocation problem as a CPLEX LP file.
    ExportLp {
        compacted: PathBuf,
        platform: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        weights: Option<String>,
    },
    /// Write a bundled example model.
    Fixture {
        #[arg(value_parser = ["robot"])]
        name: String,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands::*;
    match cli.command {
        Command::Validate { model } => validate(&model),
        Command::Compact { model, output } => compact(&model, &output),
        Command::Solve { compacted, platform, output, weights, time_limit_ms, oracle, incumbent, declared_order } => {
            let opts = SolveOptions { weights, time_limit_ms, oracle, incumbent, declared_order };
            solve(&compacted, &platform, &output, &opts)
        }
        Command::Unfold { scheme, compacted, model, output } => unfold(&scheme, &compacted, &model, &output),
        Command::Bench { n, reps, seed, warmup, time_limit_ms, json, csv } => {
            bench(&BenchOptions { n, reps, seed, warmup, time_limit_ms, json, csv })
        }
        Command::ExportLp { compacted, platform, output, weights } => export_lp(&compacted, &platform, &output, weights.as_deref()),
        Command::Fixture { name, output } => fixture(&name, &output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ALLOC_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
