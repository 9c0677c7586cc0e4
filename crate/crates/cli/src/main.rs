//! `catlip`: batch pipelines from captions to synset vocabularies, labels,
//! overlap reports, transferred classifier rows and linear probes.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit statuses.
const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "catlip", version, about = "Caption-derived synset classification pipelines")]
struct Cli {
    /// Where to write the run manifest (default: next to the primary output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Lexicon {
    /// Directory holding index.noun, data.noun and noun.exc.
    #[arg(long, env = "CATLIP_WORDNET_DIR")]
    wordnet_dir: PathBuf,

    /// Stopword list, one word per line (default: bundled English list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count caption synsets and prune them into a class vocabulary.
    VocabBuild {
        #[arg(long)]
        captions: PathBuf,
        #[command(flatten)]
        lexicon: Lexicon,
        /// Keep synsets seen in more than this many captions.
        #[arg(long, default_value_t = catlip_core::vocab::DEFAULT_V_TAU)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the unpruned synset counts.
        #[arg(long)]
        counts_out: Option<PathBuf>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Match single tokens only, no two-word collocations.
        #[arg(long)]
        strict_unigram: bool,
    },
    /// Encode captions as multi-hot vocabulary labels.
    LabelEncode {
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        lexicon: Lexicon,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Coverage of downstream labels by the vocabulary, plus count statistics.
    AnalyzeOverlap {
        #[arg(long)]
        labels_file: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        counts: PathBuf,
        #[command(flatten)]
        lexicon: Lexicon,
        /// Similarity thresholds, comma separated (default 0.5,0.6,...,1.0).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        thresholds: Vec<f64>,
        /// Pruning thresholds for the vocabulary-size table.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        v_tau_grid: Vec<u64>,
        /// Similarity at which a label's nearest class counts as matched for
        /// the per-synset sample table.
        #[arg(long, default_value_t = 1.0)]
        samples_alpha: f64,
        #[arg(long)]
        report_dir: PathBuf,
    },
    /// Build a downstream classifier matrix from pre-trained rows.
    TransferInit {
        #[arg(long)]
        labels_file: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Pre-trained rows (CATEMB01), one per vocabulary class.
        #[arg(long)]
        embeddings: PathBuf,
        #[command(flatten)]
        lexicon: Lexicon,
        #[arg(long, default_value_t = catlip_core::transfer::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = catlip_core::transfer::DEFAULT_RANDOM_SCALE)]
        random_scale: f32,
        #[arg(long)]
        out: PathBuf,
        /// Plan table (default: <out>.plan.tsv).
        #[arg(long)]
        plan_out: Option<PathBuf>,
        /// Also export the matrix as text.
        #[arg(long)]
        tsv_out: Option<PathBuf>,
    },
    /// Train a linear head on fixed features with binary cross-entropy.
    Train {
        /// CATFEA01 feature rows.
        #[arg(long)]
        features: PathBuf,
        /// JSON-lines labels aligned with the feature rows.
        #[arg(long)]
        labels: PathBuf,
        /// `random` or `transfer:<CATEMB01 file>`.
        #[arg(long, default_value = "random")]
        init: String,
        /// Number of classes; required for random init without --vocab.
        #[arg(long)]
        classes: Option<usize>,
        /// Vocabulary the labels index; stamps the output provenance.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 2.0)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0.0)]
        weight_decay: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale of the random initialization.
        #[arg(long, default_value_t = catlip_core::transfer::DEFAULT_RANDOM_SCALE)]
        random_scale: f32,
        /// Samples without labels: `skip` or `all-negative`.
        #[arg(long, default_value = "skip")]
        empty_labels: String,
        /// Gradient shards per batch (1 is the sequential reference).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Evaluate on these features/labels instead of the training set.
        #[arg(long, requires = "eval_labels")]
        eval_features: Option<PathBuf>,
        #[arg(long, requires = "eval_features")]
        eval_labels: Option<PathBuf>,
        /// Trained weights (CATEMB01); biases go to <out>.bias.tsv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics_out: PathBuf,
    },
    /// Transfer versus random initialization over data fractions.
    ExperimentTransfer {
        /// Directory written by `make-benchmark`.
        #[arg(long)]
        benchmark: PathBuf,
        #[command(flatten)]
        lexicon: Lexicon,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        fractions: Vec<f64>,
        /// Number of seeds per cell; seeds are 0..n.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 2.0)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = catlip_core::transfer::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long)]
        report_dir: PathBuf,
    },
    /// Generate a synthetic feature benchmark over a vocabulary.
    MakeBenchmark {
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        lexicon: Lexicon,
        #[arg(long, default_value_t = 20240424)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1.5)]
        noise: f64,
        #[arg(long, default_value_t = 6000)]
        pretrain_samples: usize,
        #[arg(long, default_value_t = 32)]
        probe_classes: usize,
        #[arg(long, default_value_t = 50)]
        probe_train_per_class: usize,
        #[arg(long, default_value_t = 30)]
        probe_test_per_class: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error the user can fix by changing the command line.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<catlip_core::Error>() {
            return match e {
                catlip_core::Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal invariant violated");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
