//! `floorsync` command-line tool.
//!
//! Exit status: 0 on success, 1 on usage or I/O errors, 2 when a config or
//! trace fails validation.

mod commands;
mod sweep;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "floorsync", version, about = "Turn-taking simulator and synchrony analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write its JSONL trace.
    Run {
        #[arg(long)]
        config: std::path::PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Compute the synchrony report of a trace (JSON, plus a CSV next to it).
    Analyze {
        #[arg(long)]
        trace: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lag: Option<i64>,
    },
    /// Run one simulation per seed in parallel and aggregate the reports.
    Sweep {
        #[arg(long)]
        config: std::path::PathBuf,
        /// Inclusive range, e.g. `1..8`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        #[arg(long)]
        config: std::path::PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, seed, ticks, out } => commands::run(&config, seed, ticks, &out),
        Command::Analyze { trace, out, lag } => commands::analyze(&trace, &out, lag),
        Command::Sweep { config, seeds, out, jobs } => sweep::sweep(&config, &seeds, &out, jobs),
        Command::Validate { config } => commands::validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}
