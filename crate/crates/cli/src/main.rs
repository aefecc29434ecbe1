//! `winterscan` command-line entry point.

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use commands::UsageError;

const THREADS_VAR: &str = "WINTERSCAN_THREADS";

fn usage_exit(message: &str) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, message).exit()
}

fn configure_threads() {
    let Ok(value) = std::env::var(THREADS_VAR) else { return };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            // only fails if a pool already exists, which cannot happen this early
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => usage_exit(&format!("{THREADS_VAR} must be a positive integer, got `{value}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Ingest { action } => commands::ingest(action),
        Command::Dem { action } => commands::dem(action),
        Command::Width(a) => commands::width(a),
        Command::Snowbanks(a) => commands::snowbanks(a),
        Command::Intensity(a) => commands::intensity(a),
        Command::Synth(a) => commands::synth(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                usage_exit(&u.0);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
