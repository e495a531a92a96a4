//! `xsrl`: projection-based cross-lingual SRL pipeline.

mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::{CliError, EXIT_INTERNAL};

#[derive(Debug, Parser)]
#[command(name = "xsrl", version, about = "Cross-lingual semantic role labeling via translation and projection")]
pub struct Cli {
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed (falls back to the config file, then XSRL_SEED, then 42).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for projection.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train IBM Model 1 on a `src ||| tgt` bitext and write the alignment table.
    AlignTrain {
        #[arg(long)]
        parallel: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        floor: Option<f64>,
        #[arg(long)]
        lowercase: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the add-k word→tag distribution on a tagged corpus.
    FitPos {
        #[arg(long)]
        tagged: PathBuf,
        #[arg(long)]
        smoothing: Option<f64>,
        /// Language for sentences without a `# lang` comment.
        #[arg(long)]
        lang: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project source frames onto translations.
    Project {
        #[command(flatten)]
        inputs: ProjectionInputs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Statistics report (default: `<out>.stats`).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Project at several thresholds; optionally train and score a model per threshold.
    SweepAlpha {
        #[command(flatten)]
        inputs: ProjectionInputs,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Train on each projected corpus and report dev F1.
        #[arg(long)]
        train: bool,
        /// Gold dev corpus, required with --train.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Extra training corpora merged with each projected corpus.
        #[arg(long = "train-file")]
        train_files: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a role labeler on one or more corpora.
    Train {
        /// Repeat to merge corpora.
        #[arg(long = "train-file", required = true)]
        train_files: Vec<PathBuf>,
        /// Language for sentences without a `# lang` comment.
        #[arg(long)]
        lang: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        /// Per-epoch loss log (default: `<out>.log`).
        #[arg(long)]
        log_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label the arguments of every predicate in a corpus.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lang: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Roles always listed in the role table.
        #[arg(long, value_delimiter = ',')]
        roles: Option<Vec<String>>,
        /// Distance buckets, e.g. `1-2,3-6,>=7`.
        #[arg(long)]
        buckets: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sentence, predicate and argument counts.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise distances between a model's language embeddings, as CSV.
    Similarity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average several evaluation reports.
    Aggregate {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in toy dataset.
    GenToy {
        #[arg(long)]
        out: PathBuf,
    },
    /// align-train, fit-pos, project, train, predict and eval from one manifest.
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ProjectionInputs {
    /// Source corpus with gold frames.
    #[arg(long)]
    pub source: PathBuf,
    /// Tagged translations, one per source sentence.
    #[arg(long)]
    pub translations: PathBuf,
    /// Language for translations without a `# lang` comment.
    #[arg(long)]
    pub target_lang: Option<String>,
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub pos: PathBuf,
    /// Override the alignment table's probability floor.
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// `basic` or `pgn`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub pos_dim: Option<usize>,
    #[arg(long)]
    pub pred_dim: Option<usize>,
    #[arg(long)]
    pub lang_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Pretrained word vectors (`count dim` text format), kept frozen.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| commands::run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("{}", CliError::internal("unexpected panic"));
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
