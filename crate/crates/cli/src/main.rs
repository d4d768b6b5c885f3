use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;
mod format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nomocomp", version, about = "Computation over clustered Gaussian multiple-access channels")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// SNR grid in dB as start:step:stop.
    #[arg(long = "snr-db", global = true, value_name = "START:STEP:STOP")]
    snr_db: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate curves over the SNR grid, as CSV.
    Rates,
    /// Word length needed for the configured function and accuracy.
    B0,
    /// Monte Carlo failure counts per SNR point, as CSV.
    Simulate,
    /// Prints a small nested lattice code and one decoding trace.
    DemoLattice {
        #[arg(long, default_value_t = 3)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Channel SNR of the trace in dB.
        #[arg(long, default_value_t = 20.0)]
        snr: f64,
    },
    /// Prints the default configuration.
    Defaults,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nomocomp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
