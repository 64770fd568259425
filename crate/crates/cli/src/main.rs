//! `songattn`: train, inspect and query self-attentive genre classifiers.
//!
//! Machine-readable results go to standard output as one JSON object per
//! line; diagnostics go to standard error. Exit status is 0 on success, 2
//! for configuration problems, 3 for data problems and 4 for training
//! failures.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "songattn",
    version,
    about = "Self-attentive song genre classification"
)]
pub struct Cli {
    /// Flat JSON file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for initialisation, shuffling and the validation split.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Only report errors on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Predict the genre of one record.
    Classify(RecordArgs),
    /// Render per-token attention weights for one record.
    Explain(ExplainArgs),
    /// Build a content-embedding store from a corpus.
    Embed(EmbedArgs),
    /// List the songs nearest to a query.
    Similar(SimilarArgs),
    /// Validate a corpus and report admission statistics.
    IngestCheck(IngestCheckArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Output checkpoint path.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Token table path, or `hash[:DIM[:SEED]]` for hashed vectors.
    #[arg(long, value_name = "SOURCE")]
    pub embeddings: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub grad_clip_norm: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Padded sequence length; defaults to 500 for lyrics and 30 for audio.
    #[arg(long)]
    pub seq_len: Option<usize>,
    /// Per-position input width; defaults to the embedding width.
    #[arg(long)]
    pub input_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub attention_dim: Option<usize>,
    #[arg(long)]
    pub hops: Option<usize>,
}

/// Selects one record from a corpus by id or from a single-record file.
#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "id")]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub id: Option<String>,
    /// File holding one JSON record.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["corpus", "id"])]
    pub record: Option<PathBuf>,
    /// Overrides the embedding source stored in the checkpoint.
    #[arg(long, value_name = "SOURCE")]
    pub embeddings: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Html,
    Csv,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub record: RecordArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Output store path.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "SOURCE")]
    pub embeddings: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimilarArgs {
    #[arg(long, value_name = "PATH")]
    pub store: Option<PathBuf>,
    /// Query by a stored id; that id is left out of the results.
    #[arg(long, conflicts_with = "record")]
    pub id: Option<String>,
    /// Query by a record file, embedded with `--checkpoint`.
    #[arg(long, value_name = "PATH", requires = "checkpoint")]
    pub record: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "SOURCE")]
    pub embeddings: Option<String>,
    /// Number of results (default 4).
    #[arg(short, long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestCheckArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code as u8)
        }
    }
}
