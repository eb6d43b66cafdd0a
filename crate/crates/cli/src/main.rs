//! `lexsimp` command line: each subcommand runs one stage from a flat JSON
//! configuration; `pipeline` runs them all for every system variant.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexsimp::ErrorKind;

#[derive(Debug, Parser)]
#[command(name = "lexsimp", version, about = "Sentence simplification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for the data split, model initialization and clustering.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Beam width.
    #[arg(long, global = true, value_name = "N")]
    pub beam: Option<usize>,
    /// Diversity penalty per sibling rank.
    #[arg(long, global = true, value_name = "F")]
    pub delta: Option<f64>,
    /// Number of candidate clusters.
    #[arg(long, global = true, value_name = "N")]
    pub clusters: Option<usize>,
    /// Reranking weights: `fas`, `fa` or explicit `f,a,s`.
    #[arg(long, global = true, value_name = "W")]
    pub weights: Option<String>,
    /// Strength of the complexity weighting in the loss.
    #[arg(long, global = true, value_name = "F")]
    pub alpha: Option<f64>,
    /// Loss used by `train-scorer` and `decode`: `standard` or `weighted`.
    #[arg(long, global = true, value_name = "MODE")]
    pub loss: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label corpus words with complexity levels.
    LabelLexicon,
    /// Fit the word complexity regression and evaluate it against baselines.
    TrainWord,
    /// Train the sentence complexity CNN.
    TrainSentence,
    /// Train the n-gram language model.
    TrainLm,
    /// Train the toy sequence scorer.
    TrainScorer,
    /// Decode the test sources into candidate lists.
    Decode,
    /// Cluster and rerank decoded candidates, writing one output per source.
    Rerank {
        /// Rerank all candidates without clustering.
        #[arg(long)]
        no_cluster: bool,
    },
    /// Score system outputs against the test references.
    Evaluate {
        /// One output sentence per line; defaults to `outputs.txt` in the output directory.
        #[arg(long, value_name = "PATH")]
        system: Option<PathBuf>,
        #[arg(long, default_value = "System")]
        name: String,
    },
    /// Run every stage for the configured system variants.
    Pipeline {
        /// Comma-separated variant names, e.g. `S2S,S2S-All-FA`.
        #[arg(long, value_name = "LIST")]
        variants: Option<String>,
    },
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = commands::config_from(&cli.common).and_then(|mut cfg| match cli.command {
        Command::LabelLexicon => commands::label_lexicon(&cfg),
        Command::TrainWord => commands::train_word(&cfg),
        Command::TrainSentence => commands::train_sentence(&cfg),
        Command::TrainLm => commands::train_lm(&cfg),
        Command::TrainScorer => commands::train_scorer(&cfg),
        Command::Decode => commands::decode(&cfg),
        Command::Rerank { no_cluster } => commands::rerank(&cfg, !no_cluster),
        Command::Evaluate { system, name } => commands::evaluate(&cfg, system, &name),
        Command::Pipeline { variants } => {
            if let Some(list) = variants {
                commands::set_variants(&mut cfg, &list)?;
            }
            commands::pipeline(&cfg)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
