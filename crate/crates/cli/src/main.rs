//! `iedd`: batch runs of the integral equation solver from a TOML file.
//!
//! Exit codes: 0 on success, 1 for configuration or I/O errors (nothing is
//! written when the configuration is rejected), 2 when a solve fails to
//! converge.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ie_core::Error;

#[derive(Parser)]
#[command(name = "iedd", version, about = "Integral equation modeling of induction-logging responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model and write fields, receiver values, and the residual history.
    Solve { config: PathBuf },
    /// Run every scheme in `decomposition.schemes` on the same model.
    Compare { config: PathBuf },
    /// Simulate a log along a trajectory with a moving window.
    Logsim { config: PathBuf },
}

/// Solver failures that mean "did not converge" rather than "bad input".
fn is_convergence_failure(err: &anyhow::Error) -> bool {
    matches!(
        err.downcast_ref::<Error>(),
        Some(
            Error::NonConvergence { .. }
                | Error::SweepFailure { .. }
                | Error::Breakdown { .. }
                | Error::Divergence { .. }
        )
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (Command::Solve { config } | Command::Compare { config } | Command::Logsim { config }) = &cli.command;
    let result = config::load(config).and_then(|cfg| match cli.command {
        Command::Solve { .. } => commands::solve(&cfg),
        Command::Compare { .. } => commands::compare(&cfg),
        Command::Logsim { .. } => commands::logsim(&cfg),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_convergence_failure(&e) { 2 } else { 1 })
        }
    }
}
