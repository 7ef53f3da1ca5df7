//! `ri3d`: rotation-invariant 3D point-cloud anomaly detection pipeline.
//!
//! Subcommands: `pcm` (canonicalize), `augment`, `build-bank`, `score`,
//! `evaluate`, `bench`, and `gen-synthetic`. Exit codes: 0 success,
//! 1 internal error, 2 invalid input or configuration.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rif::error::Error;

use config::ConfigArgs;

#[derive(Parser)]
#[command(name = "ri3d", version, about = "Rotation-invariant 3D point-cloud anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Canonicalize a cloud file; prints the frame and its determinant.
    Pcm {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Apply seeded scale/jitter/zero augmentation to a cloud file.
    Augment {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Build a memory bank from a category's training split.
    BuildBank {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        category: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score one cloud against a bank; writes the score CSV + JSON sidecar.
    Score {
        #[arg(long)]
        bank: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a category's test split; writes the metric report JSON.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        category: Option<String>,
        #[arg(long)]
        bank: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Time the pipeline stages over a category; reporting only.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        category: Option<String>,
        /// Write the JSON report here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a seeded synthetic defect dataset.
    GenSynthetic {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        categories: usize,
        #[arg(long, default_value_t = 4)]
        train: usize,
        #[arg(long, default_value_t = 5)]
        normal_test: usize,
        #[arg(long, default_value_t = 5)]
        defect_test: usize,
        #[arg(long, default_value_t = 2048)]
        points: usize,
    },
}

/// Dispatches one parsed invocation; the returned string is the stdout
/// payload.
pub fn run(cli: &Cli) -> rif::Result<String> {
    match &cli.command {
        Command::Pcm { input, output } => commands::cmd_pcm(input, output),
        Command::Augment { input, output, config } => {
            let cfg = config.resolve()?;
            commands::cmd_augment(input, output, &cfg)
        }
        Command::BuildBank { dataset, category, output, config } => {
            let cfg = config.resolve()?;
            commands::with_thread_pool(cfg.threads, || {
                commands::cmd_build_bank(dataset, category.as_deref(), output, &cfg)
            })
        }
        Command::Score { bank, input, output, config } => {
            let cfg = config.resolve()?;
            commands::with_thread_pool(cfg.threads, || {
                commands::cmd_score(bank, input, output, &cfg)
            })
        }
        Command::Evaluate { dataset, category, bank, output, config } => {
            let cfg = config.resolve()?;
            commands::with_thread_pool(cfg.threads, || {
                commands::cmd_evaluate(dataset, category.as_deref(), bank, output, &cfg)
            })
        }
        Command::Bench { dataset, category, output, config } => {
            let cfg = config.resolve()?;
            let report = commands::with_thread_pool(cfg.threads, || {
                commands::cmd_bench(dataset, category.as_deref(), &cfg)
            })?;
            let json = serde_json::to_string_pretty(&report)
                .map(|s| s + "\n")
                .map_err(|e| Error::Internal(format!("serializing bench report: {e}")))?;
            if let Some(path) = output {
                std::fs::write(path, &json)?;
            }
            Ok(json)
        }
        Command::GenSynthetic {
            output,
            seed,
            categories,
            train,
            normal_test,
            defect_test,
            points,
        } => {
            let spec = rif::io::synth::GenSpec {
                categories: *categories,
                train: *train,
                normal_test: *normal_test,
                defect_test: *defect_test,
                points: *points,
            };
            commands::cmd_gen_synthetic(*seed, &spec, output)
        }
    }
}

/// Exit code for a failed run: internal errors are 1, everything
/// input-shaped is 2.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Internal(_) => 1,
        _ => 2,
    }
}
