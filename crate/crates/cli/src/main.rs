// SPDX-License-Identifier: Apache-2.0
//! `rigidnet`: solve, simulate and stress levered production networks.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rigidnet_core::engine::{DEFAULT_NUM_DRAWS, DEFAULT_SEED};

use crate::commands::Outcome;
use crate::error::{CliError, CliResult};

/// Environment variable capping the worker count. Results do not depend on it.
const THREADS_VAR: &str = "RIGIDNET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rigidnet", version, about = "Rigid equilibria of levered production networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a document and print its canonical form.
    Validate { file: PathBuf },
    /// Solve cost of debt and the maximal equilibrium.
    Equilibrium {
        file: PathBuf,
        #[arg(long, default_value_os_t = commands::default_out())]
        out: PathBuf,
        /// Overrides the document's Monte Carlo draw count.
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a Monte Carlo campaign at the solved equilibrium.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, default_value_os_t = commands::default_out())]
        out: PathBuf,
    },
    /// Classify defaults after the shocked sector realizes `--eta-o`.
    Defaults {
        file: PathBuf,
        #[arg(long = "eta-o", allow_negative_numbers = true)]
        eta_o: f64,
        #[arg(long, default_value_os_t = commands::default_out())]
        out: PathBuf,
    },
    /// Re-solve along a leverage grid for one sector and check monotonicity.
    Sweep {
        file: PathBuf,
        /// One-based sector index.
        #[arg(long)]
        sector: usize,
        /// `start:stop:step`.
        #[arg(long = "theta-grid")]
        theta_grid: String,
        #[arg(long, default_value_os_t = commands::default_out())]
        out: PathBuf,
    },
    /// Recompute a published table and diff it cell by cell.
    Reproduce {
        /// 1 to 8, or `cycle-minus-line`.
        #[arg(long)]
        table: String,
        #[arg(long, default_value_t = DEFAULT_NUM_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_os_t = commands::default_out())]
        out: PathBuf,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

fn run(cli: Cli) -> CliResult<Outcome> {
    configure_threads()?;
    match cli.command {
        Command::Validate { file } => commands::validate(&file),
        Command::Equilibrium { file, out, draws, seed } => commands::equilibrium(&file, &out, draws, seed),
        Command::Simulate { file, draws, seed, bins, out } => commands::simulate(&file, &out, draws, seed, bins),
        Command::Defaults { file, eta_o, out } => commands::defaults(&file, &out, eta_o),
        Command::Sweep { file, sector, theta_grid, out } => commands::sweep(&file, &out, sector, &theta_grid),
        Command::Reproduce { table, draws, seed, out } => commands::reproduce_table(&table, &out, draws, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
