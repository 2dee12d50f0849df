//! Command-line pipeline: ingest a corpus, run benchmark protocols against
//! dialogue backends, profile reference and generated speech, and report.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;

pub use config::{load_config, LoadedConfig, RunConfig};
pub use error::{CliError, ErrorCode};

#[derive(Debug, Parser)]
#[command(name = "cdsbench", version, about = "Child-caregiver dialogue benchmark")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "cdsbench.toml")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select the benchmark set and write it with corpus statistics.
    Ingest,
    /// Execute configured runs (resumable).
    Run {
        /// Only this run.
        #[arg(long)]
        run: Option<String>,
    },
    /// Profile reference and generated conversations and build the report.
    Analyze {
        /// Directory holding one subdirectory per run [default: <output_dir>/runs].
        #[arg(long)]
        runs_dir: Option<PathBuf>,
        /// Output directory [default: <output_dir>/analysis].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild report files from an existing metrics.csv.
    Report {
        /// Analysis directory [default: <output_dir>/analysis].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute one run and capture every completion as a playback fixture.
    Record {
        #[arg(long)]
        run: String,
    },
    /// Re-execute one run from a playback fixture.
    Replay {
        #[arg(long)]
        run: String,
        /// Fixture file [default: <output_dir>/fixtures/<run>.jsonl].
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
}

/// Outcome of argument parsing that is not a command to execute.
pub enum Parsed {
    Run(Cli),
    /// Help or version text to print, exit 0.
    Info(String),
}

pub fn parse_args<I, T>(args: I) -> Result<Parsed, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => Ok(Parsed::Run(cli)),
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                Ok(Parsed::Info(e.to_string()))
            }
            _ => Err(CliError::new(ErrorCode::Usage, e.to_string().trim().to_string())),
        },
    }
}

pub fn execute(cli: &Cli) -> Result<Value, CliError> {
    let loaded = load_config(&cli.config)?;
    match &cli.command {
        Command::Ingest => commands::ingest(&loaded),
        Command::Run { run } => commands::run(&loaded, run.as_deref()),
        Command::Analyze { runs_dir, out } => commands::analyze(
            &loaded,
            &commands::AnalyzeOptions {
                runs_dir: runs_dir.clone(),
                out_dir: out.clone(),
            },
        ),
        Command::Report { out } => commands::report(&loaded, out.as_deref()),
        Command::Record { run } => commands::record(&loaded, run),
        Command::Replay { run, fixture } => commands::replay(&loaded, run, fixture.as_deref()),
    }
}

/// Parses and executes; returns stdout text on success.
pub fn run_cli<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(args)? {
        Parsed::Info(text) => Ok(text),
        Parsed::Run(cli) => {
            let v = execute(&cli)?;
            Ok(serde_json::to_string_pretty(&v).expect("serializes") + "\n")
        }
    }
}
