//! Command-line driver: data preparation, training, generation, evaluation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid input
//! data or config, 4 missing prerequisite (e.g. a pretrained checkpoint).
//! Log verbosity is read from `PUNGEN_LOG` (`error` .. `trace`, default `info`).

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pungen",
    version,
    about = "Train and sample a dual-sense pun generator"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML training config; absent keys take defaults.
    #[arg(long, global = true, env = "PUNGEN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Root directory for prepared data, checkpoints, logs and manifests.
    #[arg(long, global = true, default_value = "run")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate corpora and write the dataset, vocabulary and sense pairs.
    PrepareData(PrepareArgs),
    /// Run one training stage on the prepared dataset.
    Train(TrainArgs),
    /// Generate sentences for sense pairs from a generator checkpoint.
    Generate(GenerateArgs),
    /// Compute unusualness and distinct-n for a generator checkpoint.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Sense inventory TSV (`lemma<TAB>sense`).
    #[arg(long)]
    pub inventory: PathBuf,
    /// Sense-tagged corpus JSONL.
    #[arg(long)]
    pub labeled: PathBuf,
    /// Unlabeled corpus JSONL.
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    /// Sense pairs JSONL used during adversarial training; defaults to every
    /// two-sense combination in the inventory.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Longer sentences are cut to a window around the target.
    #[arg(long, default_value_t = pungen::corpus::DEFAULT_MAX_SENTENCE_LEN)]
    pub max_sentence_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    PretrainGen,
    PretrainDisc,
    Gan,
    GanFrozenDisc,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            self.to_possible_value()
                .expect("no skipped variants")
                .get_name(),
        )
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Continue an adversarial run from the checkpoints of this round.
    #[arg(long)]
    pub resume_round: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecodeArg {
    Sample,
    Greedy,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Sense pairs JSONL.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Sentences per pair.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = DecodeArg::Sample)]
    pub decode: DecodeArg,
    /// Word budget; defaults to the config's `max_len`.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Write sentences here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Generator checkpoint to evaluate.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Sense pairs JSONL.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Sense-labeled JSONL sample of training sentences.
    #[arg(long)]
    pub training_sample: PathBuf,
    /// Generator checkpoint used as the scoring language model; defaults to
    /// the pretrained generator under the output directory.
    #[arg(long)]
    pub scoring_lm: Option<PathBuf>,
    /// Discriminator checkpoint; adds the mean reward to the report.
    #[arg(long)]
    pub discriminator: Option<PathBuf>,
    /// Generated sentences, spread over the pairs.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = DecodeArg::Sample)]
    pub decode: DecodeArg,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Score the training sample against itself instead of generating.
    #[arg(long)]
    pub self_compare: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also print a plain-text table to stderr.
    #[arg(long)]
    pub table: bool,
}

/// A required input produced by an earlier step is missing.
#[derive(Debug)]
pub struct MissingPrerequisite(pub String);

impl fmt::Display for MissingPrerequisite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "missing prerequisite: {}", self.0)
    }
}

impl std::error::Error for MissingPrerequisite {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use pungen::Error as E;
    if err.downcast_ref::<MissingPrerequisite>().is_some() {
        return 4;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse { .. }
                | E::Duplicate { .. }
                | E::Validation { .. }
                | E::UnknownLemma(_)
                | E::Config(_)
                | E::InvalidArgument(_) => 3,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PUNGEN_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match &cli.command {
        Command::PrepareData(a) => commands::prepare_data(&cli.global, a, args),
        Command::Train(a) => commands::train(&cli.global, a, args),
        Command::Generate(a) => commands::generate(&cli.global, a, args),
        Command::Evaluate(a) => commands::evaluate(&cli.global, a, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
