//! `docsift` command-line pipeline: ingest → tokenize → index → rank/ask → eval.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(
    name = "docsift",
    version,
    about = "Condense regulation documents and find answer passages"
)]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for paragraph-vector training (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a text document into a paragraph store.
    Ingest {
        input: PathBuf,
        /// Document title; defaults to the file stem.
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace defined terms and dependency groups with registry tokens.
    Tokenize {
        /// Paragraph store; defaults to the configured store path.
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Registry file, extended in place when it already exists.
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        warnings: Option<PathBuf>,
        #[arg(long)]
        no_definitions: bool,
        #[arg(long)]
        no_dependency: bool,
    },
    /// Build the hybrid TF-IDF / paragraph-vector index.
    Index {
        /// Paragraph store; defaults to the configured tokenized store.
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank paragraphs for a question.
    Rank {
        question: String,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[arg(long)]
        json: bool,
    },
    /// Answer a question (or a dataset of questions) through the QA service.
    Ask {
        /// Question text; omit when using --dataset.
        #[arg(required_unless_present = "dataset")]
        question: Option<String>,
        /// SQuAD-format file; answers every question and writes predictions.
        #[arg(long, conflicts_with = "question")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        predictions_out: Option<PathBuf>,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        /// Paragraph store holding the indexed paragraphs.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        endpoint: Option<String>,
        /// Ask each ranked paragraph separately instead of joining them.
        #[arg(long)]
        per_paragraph: bool,
        #[arg(long)]
        json: bool,
    },
    /// Score predictions against a SQuAD-format dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// `LABEL=PATH` (or just `PATH`); repeat to compare systems.
        #[arg(long, required = true)]
        predictions: Vec<String>,
        /// `LABEL=PATH` of manual 1-3 grades for the system with that label.
        #[arg(long)]
        q_scores: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print Soundex codes.
    EncodeSoundex {
        #[arg(required = true)]
        words: Vec<String>,
        #[arg(long, default_value_t = docsift::phonetics::DEFAULT_CODE_LENGTH)]
        length: usize,
    },
    /// Serve the deterministic keyword-overlap QA stub on localhost.
    StubQa {
        #[arg(long, default_value_t = 8765)]
        port: u16,
    },
}

#[derive(Args, Debug)]
struct RetrievalArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    /// Registry used to tokenize the question; skipped when the file is absent.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    weight: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()))
        .with_writer(std::io::stderr)
        .init();

    let result = PipelineConfig::load(cli.config.as_deref()).and_then(|mut cfg| {
        if let Some(seed) = cli.seed {
            cfg.ranking.pv.seed = seed;
        }
        commands::run(cli.command, &cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
