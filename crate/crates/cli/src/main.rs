//! `alphadesk`: formulaic alpha evaluation and PPO weight training.
//!
//! Exit codes: 0 success, 1 validation or configuration error, 2 runtime
//! failure (divergence, non-finite arithmetic, missing values mid-run).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "alphadesk", version, about = "alpha corpus scoring and PPO-weighted trading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute indicator and risk columns and dump the feature table
    Features {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score every alpha on the training split (IC, MI, gain importance)
    EvalAlphas {
        #[arg(long)]
        config: PathBuf,
    },
    /// Apply the configured subset selection and record what survives
    Select {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train PPO weights on the training split and write a checkpoint
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on the held-out window against baselines
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint to evaluate (defaults to <output_dir>/checkpoint.json)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Render artifacts already in the output directory as text and CSV
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Features { config } => {
            let ws = commands::prepare(RunConfig::load(&config)?)?;
            commands::cmd_features(&ws)
        }
        Command::EvalAlphas { config } => {
            let ws = commands::prepare(RunConfig::load(&config)?)?;
            commands::cmd_eval_alphas(&ws)
        }
        Command::Select { config } => {
            let ws = commands::prepare(RunConfig::load(&config)?)?;
            commands::cmd_select(&ws)
        }
        Command::Train { config } => {
            let ws = commands::prepare(RunConfig::load(&config)?)?;
            commands::cmd_train(&ws)
        }
        Command::Backtest { config, checkpoint } => {
            let ws = commands::prepare(RunConfig::load(&config)?)?;
            commands::cmd_backtest(&ws, checkpoint.as_deref())
        }
        Command::Report { config } => commands::cmd_report(&RunConfig::load(&config)?),
    }
}

/// Numeric trouble at runtime maps to 2; everything else (bad config,
/// missing files, schema violations) is a validation failure, 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<alphadesk::Error>() {
            return if e.is_runtime() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
