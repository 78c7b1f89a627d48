//! Command-line driver: every pipeline stage as a subcommand that writes its
//! artifacts plus a run manifest into an output directory.
//!
//! Exit codes: 0 on success, 1 on data errors, 2 on configuration errors.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "ecr-cad", version, about = "Counterfactual augmentation and evaluation for cross-document event coreference")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for the content-addressed LLM response cache.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus file; defaults to the config entry for the split.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Debug, Clone, Args)]
pub struct PairingArgs {
    #[arg(long)]
    pub w: Option<usize>,
    #[arg(long)]
    pub k_train: Option<usize>,
    #[arg(long)]
    pub k_infer: Option<usize>,
    /// within-topic or corpus-wide.
    #[arg(long)]
    pub scope: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalizer {
    Lemma,
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalFormat {
    Pairwise,
    DocTemplate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LeaMode {
    SelfLink,
    Exclude,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and index a corpus; write its mentions and statistics.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare split statistics with a published row or explicit counts.
    Validate {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// ecb+, fcc or gvc.
        #[arg(long, conflicts_with = "expected")]
        dataset: Option<String>,
        /// Explicit `documents,sentences,mentions`.
        #[arg(long)]
        expected: Option<String>,
        /// Exit 1 when any count differs.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trigger lexical-matching histogram of a pair file.
    AnalyzeBias {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = ecr_cad::triggersim::DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long, value_enum, default_value_t = Normalizer::Lemma)]
        normalizer: Normalizer,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discourse windows and nearest-neighbour mention pairs.
    BuildPairs {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        pairing: PairingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate counterfactual pairs and mix them into the originals.
    Augment {
        #[arg(long)]
        pairs: PathBuf,
        /// cad, tia, cia or tad.
        #[arg(long)]
        kind: String,
        /// mock, transcripts or http.
        #[arg(long)]
        provider: Option<String>,
        /// Fixture file for the mock or transcripts provider.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        per_original: Option<usize>,
        #[arg(long)]
        top_n: Option<usize>,
        /// Freeze the responses served in this run into a mock fixture file.
        #[arg(long)]
        record_fixtures: Option<PathBuf>,
        /// Also write a human-readable dump with sentence markers.
        #[arg(long)]
        dump: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score pairs with the lemma baseline or an external scorer.
    Score {
        #[arg(long)]
        pairs: PathBuf,
        /// `lemma` or the URL of a scorer server.
        #[arg(long)]
        scorer: Option<String>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge scored pairs into clusters; also writes the gold key.
    Cluster {
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        scope: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// MUC, B³, CEAF_e, LEA and CoNLL for a key/response pair of cluster files.
    Evaluate {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        response: PathBuf,
        #[arg(long, value_enum)]
        lea_singletons: Option<LeaMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a directory of raw LLM evaluation responses.
    LlmEvalParse {
        /// Directory of `<id>.txt` responses.
        #[arg(long)]
        transcripts: PathBuf,
        /// Gold labels (pairwise) or gold mentions per document (doc-template).
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalFormat::Pairwise)]
        format: EvalFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// ingest, build-pairs, analyze-bias, [augment], score, cluster and evaluate in one go.
    Pipeline {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        pairing: PairingArgs,
        #[arg(long)]
        scorer: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Augmentation kinds to generate from the pairs (repeatable).
        #[arg(long)]
        augment: Vec<String>,
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Validate { .. } => "validate",
            Command::AnalyzeBias { .. } => "analyze-bias",
            Command::BuildPairs { .. } => "build-pairs",
            Command::Augment { .. } => "augment",
            Command::Score { .. } => "score",
            Command::Cluster { .. } => "cluster",
            Command::Evaluate { .. } => "evaluate",
            Command::LlmEvalParse { .. } => "llm-eval-parse",
            Command::Pipeline { .. } => "pipeline",
        }
    }
}

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input data (exit 1).
    Data(anyhow::Error),
    /// Bad configuration, flags or missing paths (exit 2).
    Config(anyhow::Error),
}

impl Failure {
    pub fn data(msg: impl std::fmt::Display) -> Self {
        Failure::Data(anyhow::anyhow!("{msg}"))
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        Failure::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Data(_) => 1,
            Failure::Config(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Data(_) => "data",
            Failure::Config(_) => "config",
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Data(e) | Failure::Config(e) => e,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} error: {:#}", self.kind(), self.error())
    }
}

/// Parses `args`, runs the command and reports. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let json = cli.global.json;
    match commands::run(&cli) {
        Ok(summary) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&summary.json).expect("summary serializes"));
            } else if !summary.text.is_empty() {
                print!("{}", summary.text);
            }
            0
        }
        Err(failure) => {
            if json {
                let body = json!({
                    "error": {
                        "kind": failure.kind(),
                        "message": format!("{:#}", failure.error()),
                        "exit_code": failure.exit_code(),
                    }
                });
                eprintln!("{body}");
            } else {
                eprintln!("ecr-cad: {failure}");
            }
            failure.exit_code()
        }
    }
}
