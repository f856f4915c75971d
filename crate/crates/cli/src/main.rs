//! `fuseid`: synthesize or ingest embeddings, train the fusion network,
//! extract features, train and evaluate the SVM, and compare conditions.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod runlog;

use fuseid_core::store::Split;

#[derive(Debug, Parser)]
#[command(
    name = "fuseid",
    version,
    about = "Face-aided speaker identification experiments",
    after_help = "Any configuration key can be overridden with --<section>.<key> <value>, \
                  e.g. --train.learning_rate 0.02 or --arch.voice_hidden_dims [256]."
)]
pub struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (falls back to $FUSEID_SEED, then 7).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic shared-latent dataset (FUSEID1).
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Shorthand for --synth.num_identities.
        #[arg(long)]
        identities: Option<usize>,
    },
    /// Train the two-branch fusion network on the train split.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss history JSON (default: <out>.history.json).
        #[arg(long)]
        history: Option<PathBuf>,
        /// Shorthand for --train.epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Extract fusion-layer features (FUSEFEA1).
    Extract {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Replace every face input with the zero vector.
        #[arg(long)]
        mask_face: bool,
    },
    /// Train the one-vs-one polynomial SVM on a train-split feature file.
    SvmTrain {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an SVM on a test-split feature file.
    Eval {
        #[arg(long)]
        svm: Option<PathBuf>,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Confusion matrix CSV (default: <report>.confusion.csv).
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// SVM directly on the raw voice embeddings, no fusion network.
    Baseline {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Merge evaluation reports into a comparison table.
    Compare {
        #[arg(num_args = 2.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full experiment on a data file: baseline, aided and masked conditions.
    Run {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory (default: paths.report_dir, then ".").
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    match commands::run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(e)) if !e.use_stderr() => {
            let _ = e.print();
            ExitCode::SUCCESS
        }
        Err(commands::CliError::Usage(e)) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid usage");
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[E_USAGE]: {msg} (see fuseid --help)");
            ExitCode::from(2)
        }
        Err(commands::CliError::Core(e)) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
