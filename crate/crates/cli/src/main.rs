//! Command-line driver: wires JSON run configurations to the models,
//! schemes, verification suites and reports of the toolkit.
//!
//! Exit codes: 0 on success, 1 on scientific failure (a check or
//! certificate did not hold), 2 on usage or configuration errors.

mod commands;
mod config;
mod render;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Science(String),
}

impl CliError {
    fn science(e: impl std::fmt::Display) -> Self {
        CliError::Science(e.to_string())
    }

    fn io(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "rangereg",
    about = "Regularization schemes for inverse problems with a range-invariant linearization",
    version
)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (defaults to the config's `out_dir`, then `./out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweep parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Dotted-path config overrides, e.g. `reg.alpha=1e-4`.
    #[arg(long = "override", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every module's invariant battery and print a check table.
    Verify,
    /// Generate data at one noise level, run the scheme, write artifacts.
    Reconstruct,
    /// Run the configured noise sweep and grade its declared slope checks.
    Sweep,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let cfg = config::load_config(config_path, &cli.overrides)?;
    let workers = cli.workers.or(cfg.workers);
    if let Some(k) = workers {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Verify => commands::cmd_verify(&cfg),
        Command::Reconstruct => commands::cmd_reconstruct(&cfg, &out),
        Command::Sweep => commands::cmd_sweep(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Science(msg)) => {
            eprintln!("scientific failure: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage/config error: {msg}");
            ExitCode::from(2)
        }
    }
}
