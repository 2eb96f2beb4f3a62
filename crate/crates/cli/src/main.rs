//! `activesearch`: benchmarks, machine traces, compliance analysis and the
//! game server.
//!
//! Exit status is 0 on success, 1 on a runtime error and 2 on a usage
//! error. Warnings go to stderr and do not change the status.

mod commands;
mod config;
mod output;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::GridArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<activesearch_core::Error> for CliError {
    fn from(e: activesearch_core::Error) -> Self {
        use activesearch_core::Error as E;
        match e {
            E::Config(_) | E::Usage(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "activesearch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Bayesian optimization over a grid and write per-step regret as CSV.
    Bench {
        #[command(flatten)]
        grid: GridArgs,
        /// Output CSV; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write one machine trace file per grid cell.
    Simulate {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Classify the search strategy of every trace in the given files or
    /// directories.
    Analyze {
        #[command(flatten)]
        grid: GridArgs,
        /// Trace files (`.jsonl`) or directories holding them.
        inputs: Vec<PathBuf>,
        /// Directory for records.csv and tables.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write iterations.csv with every distance.
        #[arg(long, requires = "out_dir")]
        iterations: bool,
    },
    /// Print count tables from a records.csv written by `analyze`.
    Report { records: PathBuf },
    /// Serve the game API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Append-only trace file for finished games.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, default_value_t = activesearch_service::sessions::DEFAULT_BUDGET)]
        budget: usize,
        /// Minutes of inactivity before a session finishes on its own.
        #[arg(long, default_value_t = 30)]
        timeout_minutes: u64,
        /// Seed of the function draw.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench { grid, out } => commands::bench(&grid, out.as_deref()),
        Command::Simulate { grid, out_dir } => commands::simulate(&grid, &out_dir),
        Command::Analyze {
            grid,
            inputs,
            out_dir,
            iterations,
        } => commands::analyze(&grid, &inputs, out_dir.as_deref(), iterations),
        Command::Report { records } => commands::report(&records),
        Command::Serve {
            addr,
            store,
            budget,
            timeout_minutes,
            seed,
        } => commands::serve(addr, store, budget, timeout_minutes, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}
