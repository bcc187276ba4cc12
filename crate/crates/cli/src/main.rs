//! `dppsearch`: run proof searches, filter candidate files, sample from
//! kernels, and analyze transition logs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
//! Every failure prints a single `error: ...` line to stderr.

mod analyze_cmd;
mod config;
mod filter_cmd;
mod sample_cmd;
mod search_cmd;

use clap::{Parser, Subcommand};

/// Errors surfaced to the user, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config, or input preconditions: exit 2.
    Usage(String),
    /// Failures while doing the work: exit 1, artifacts may be partial.
    Runtime(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError::Runtime(message.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "dppsearch",
    version,
    about = "Proof search with determinantal tactic filtering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded proof-search attempts and write logs, reports, and a summary.
    Search(search_cmd::SearchArgs),
    /// Select a subset of a candidate-tactic file.
    Filter(filter_cmd::FilterArgs),
    /// Draw subsets from a kernel file, optionally against the exact law.
    SampleDpp(sample_cmd::SampleArgs),
    /// Compute metric summaries over one or more transition logs.
    Analyze(analyze_cmd::AnalyzeArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            // Keep the machine-parseable single-line contract.
            let line = e
                .to_string()
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("error: invalid arguments")
                .to_string();
            if line.starts_with("error") {
                eprintln!("{line}");
            } else {
                eprintln!("error: {line}");
            }
            std::process::exit(2);
        }
    };

    let result = match cli.command {
        Command::Search(args) => search_cmd::run(args),
        Command::Filter(args) => filter_cmd::run(args),
        Command::SampleDpp(args) => sample_cmd::run(args),
        Command::Analyze(args) => analyze_cmd::run(args),
    };

    if let Err(e) = result {
        eprintln!("error: {}", e.message().replace('\n', "; "));
        std::process::exit(e.exit_code());
    }
}
