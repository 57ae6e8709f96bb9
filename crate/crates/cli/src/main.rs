//! `trendgram` command-line driver.
//!
//! Exit codes: 0 on success, 1 when input data fails to load or validate,
//! 2 when the configuration (flags or config file) is invalid.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::ConfigArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "trendgram",
    version,
    about = "Change-pattern features and C4.5 classification for yearly metric series"
)]
struct Cli {
    /// Worker threads for featurization and cross-validation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Observation and label files.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV with header entity_id,metric,year,value.
    #[arg(long, value_name = "FILE")]
    pub observations: PathBuf,
    /// CSV with header entity_id,label,anchor_year.
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and align the inputs and summarize them.
    Validate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Select pattern features on all entities and write features.json.
    Featurize {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Reuse the feature space from a features.json or feature-space file.
        #[arg(long, value_name = "FILE")]
        feature_space: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Cross-validate the quantity baseline and the combined features and
    /// write report.json and report.md.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Fixed feature space for the combined run instead of selection.
        #[arg(long, value_name = "FILE")]
        feature_space: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Featurize and evaluate in one go; also writes a tree trained on all
    /// entities.
    Pipeline {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (created if missing).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Write a synthetic cohort as observations.csv and labels.csv.
    Synth(commands::SynthArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    match cli.command {
        Command::Validate { data, config } => commands::validate(&data, &config.resolve()?),
        Command::Featurize {
            data,
            config,
            feature_space,
            out,
        } => commands::featurize(&data, &config.resolve()?, feature_space.as_deref(), &out),
        Command::Evaluate {
            data,
            config,
            feature_space,
            out,
        } => commands::evaluate(&data, &config.resolve()?, feature_space.as_deref(), &out),
        Command::Pipeline { data, config, out } => {
            commands::pipeline(&data, &config.resolve()?, &out)
        }
        Command::Synth(args) => commands::synth(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
