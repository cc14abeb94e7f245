//! `mvdis`: train, evaluate, sweep and export multi-view clustering runs.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 dataset or input
//! error, 3 training failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;

use error::CliError;

/// Environment variable naming the default root for command outputs.
pub const OUT_DIR_ENV: &str = "MVDIS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mvdis", version, about = "Multi-view clustering with disentangled autoencoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML training config; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output location; defaults to a subdirectory of $MVDIS_OUT_DIR (or ./mvdis-runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on a dataset directory and cluster the learned representation.
    Train {
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Number of clusters; defaults to the number of label classes.
        #[arg(long)]
        k: Option<usize>,
        /// Fraction of samples given hidden views before training.
        #[arg(long)]
        missing_ratio: Option<f64>,
    },
    /// Cluster saved embeddings or a checkpoint's representation and score it.
    Eval {
        dataset: PathBuf,
        /// Embeddings CSV as written by `train`.
        #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
        embeddings: Option<PathBuf>,
        /// Checkpoint as written by `train`; its config is used unless --config is given.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train one run per grid cell and write a summary table.
    Sweep {
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Values as `a,b,c` or `start:end:step` (inclusive).
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long)]
        betas: Option<String>,
        /// Representation widths, each setting both dz and dc.
        #[arg(long, conflicts_with_all = ["alphas", "betas"])]
        dims: Option<String>,
        /// Cells trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        missing_ratio: Option<f64>,
    },
    /// Project embeddings to 2-D for plotting, as CSV `x,y,label`.
    Project {
        embeddings: PathBuf,
        #[arg(long, value_enum, default_value = "pca")]
        method: Method,
        /// Labels CSV to attach; the label column is left empty otherwise.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Output CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic three-view dataset.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 600)]
        samples: usize,
    },
    /// Hide views of a fraction of samples and write the masked dataset.
    Mask {
        dataset: PathBuf,
        #[arg(long)]
        missing_ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Method {
    Pca,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            dataset,
            common,
            k,
            missing_ratio,
        } => commands::train(&dataset, &common, k, missing_ratio),
        Command::Eval {
            dataset,
            embeddings,
            checkpoint,
            common,
            k,
        } => commands::eval(&dataset, embeddings.as_deref(), checkpoint.as_deref(), &common, k),
        Command::Sweep {
            dataset,
            common,
            alphas,
            betas,
            dims,
            jobs,
            k,
            missing_ratio,
        } => commands::sweep(
            &dataset,
            &common,
            commands::GridArgs { alphas, betas, dims },
            jobs,
            k,
            missing_ratio,
        ),
        Command::Project {
            embeddings,
            method: Method::Pca,
            labels,
            out,
        } => commands::project(&embeddings, labels.as_deref(), out),
        Command::Synth { out, seed, samples } => commands::synth(out, seed, samples),
        Command::Mask {
            dataset,
            missing_ratio,
            seed,
            out,
        } => commands::mask(&dataset, missing_ratio, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
