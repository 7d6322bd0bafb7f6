//! `omivae` command-line surface.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{PhaseSelection, PreprocessInputs, RowFilter};
use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "omivae", version, about = "Multi-omics variational autoencoder: data, training and evaluation")]
pub struct Cli {
    /// Configuration file with flat `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one configuration key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-omics corpus (raw TSVs and a dataset cache).
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Filter, impute, normalize and group raw TSVs into a dataset cache.
    Preprocess {
        #[arg(long, value_name = "FILE")]
        expression: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        methylation: Option<PathBuf>,
        /// Feature to chromosome map (`feature_id`, `chromosome`; NA = unmapped).
        #[arg(long, value_name = "FILE")]
        annotation: Option<PathBuf>,
        /// Sample to class map (`sample_id`, `class_name`).
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the per-rule removal report here.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Train on one stratified fold (`split.fold` tests, the next fold validates).
    Train {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        phase: PhaseSelection,
        /// Continue from a checkpoint written by an earlier `train`.
        #[arg(long, value_name = "FILE")]
        resume: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation with per-fold reports and mean ± sd.
    Crossval {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Fold count; overrides `split.k`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Write latent means (Infer mode) as an embedding TSV.
    Embed {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Split file written by `train`; restricts to samples with `--role`.
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        role: String,
    },
    /// Accuracy, weighted precision/recall/F1 and confusion matrix.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        role: String,
    },
    /// Scatter plot (SVG) of the first two dimensions of an embedding TSV.
    Plot {
        #[arg(long, value_name = "FILE")]
        embedding: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    match &cli.command {
        Command::Synth { out } => commands::cmd_synth(&cfg, out),
        Command::Preprocess {
            expression,
            methylation,
            annotation,
            labels,
            out,
            report,
        } => {
            let inputs = PreprocessInputs {
                expression: expression.clone(),
                methylation: methylation.clone(),
                annotation: annotation.clone(),
                labels: labels.clone(),
            };
            commands::cmd_preprocess(&cfg, &inputs, out, report.as_deref())
        }
        Command::Train {
            data,
            out,
            phase,
            resume,
        } => commands::cmd_train(&cfg, data, out, *phase, resume.as_deref()),
        Command::Crossval { data, out, k } => {
            if let Some(k) = k {
                cfg.set("split.k", &k.to_string())?;
            }
            commands::cmd_crossval(&cfg, data, out)
        }
        Command::Embed {
            checkpoint,
            data,
            out,
            split,
            role,
        } => {
            let rows = RowFilter {
                split: split.as_deref(),
                role,
            };
            commands::cmd_embed(checkpoint, data, rows, out)
        }
        Command::Evaluate {
            checkpoint,
            data,
            out,
            split,
            role,
        } => {
            let rows = RowFilter {
                split: split.as_deref(),
                role,
            };
            commands::cmd_evaluate(checkpoint, data, rows, out.as_deref())
        }
        Command::Plot { embedding, out, title } => commands::cmd_plot(embedding, out, title.as_deref()),
    }
}
