mod commands;
mod config;
mod error;
mod sas_spec;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;

/// Rate sentiment analysis systems for statistical and confounding bias.
#[derive(Debug, Parser)]
#[command(name = "sasrate", version)]
struct Cli {
    /// JSON config file; flags and environment variables take precedence.
    #[arg(long, global = true, env = "SASRATE_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic datasets of one group.
    Generate(GenerateArgs),
    /// Score every dataset with one or more systems.
    Evaluate(EvaluateArgs),
    /// Compute raw bias scores and ratings.
    Rate(RateArgs),
    /// Round-trip datasets through a pivot language, or compare two reports.
    Roundtrip(RoundtripCmd),
    /// Turn a conversation log into datasets.
    Ingest(IngestArgs),
    /// Work with human annotations.
    Annotate {
        #[command(subcommand)]
        command: AnnotateCmd,
    },
    /// Conversation statistics of a log.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Group number, 1 to 4.
    #[arg(long)]
    pub group: u8,
    /// Output data directory; merged with existing datasets.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "SASRATE_SEED")]
    pub seed: Option<u64>,
    /// Share of positive emotion words for the privileged class (groups 2 and 4).
    #[arg(long)]
    pub skew: Option<f64>,
    /// Times each template/person/emotion combination is emitted.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Generation config (templates, names, emotion sets); overrides the
    /// `generation` section of --config.
    #[arg(long)]
    pub gen_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// System as `[NAME=]SPEC`: builtin:biased, builtin:random:SEED,
    /// builtin:lexicon[:FILE], worker:CMD, http:URL or labels:FILE.
    #[arg(long = "sas", required = true)]
    pub sas: Vec<String>,
    /// Scores directory; defaults to `<data>/scores`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "SASRATE_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,
    #[arg(long, env = "SASRATE_MAX_IN_FLIGHT")]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Scores directory; defaults to `<data>/scores`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Rate only these systems.
    #[arg(long = "sas")]
    pub sas: Vec<String>,
    #[arg(long, env = "SASRATE_LEVELS")]
    pub levels: Option<u32>,
    #[arg(long, env = "SASRATE_ZERO_TOL")]
    pub zero_tol: Option<f64>,
    /// Report JSON; defaults to `<data>/report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Markdown table; defaults to the report path with `.md`.
    #[arg(long)]
    pub markdown: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TranslatorKind {
    Identity,
    Mock,
    Http,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct RoundtripCmd {
    #[command(subcommand)]
    pub command: Option<RoundtripSub>,
    #[command(flatten)]
    pub run: RoundtripArgs,
}

#[derive(Debug, Subcommand)]
pub enum RoundtripSub {
    /// Percent change of every raw score between two reports.
    Compare {
        before: PathBuf,
        after: PathBuf,
        /// Write the delta table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pivot language, e.g. `da` or `es`.
    #[arg(long)]
    pub via: Option<String>,
    #[arg(long, value_enum, default_value = "mock")]
    pub translator: TranslatorKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Translation cache; defaults to `<out>/translation-cache.jsonl`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Translator service for `--translator http`.
    #[arg(long, env = "SASRATE_TRANSLATOR_URL")]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = sasrate::roundtrip::DEFAULT_PARALLELISM)]
    pub parallelism: usize,
    /// Synonym table (JSON object) for the mock translator.
    #[arg(long)]
    pub mock_table: Option<PathBuf>,
    /// Probability that the mock translator drops a stopword.
    #[arg(long, default_value_t = 0.0)]
    pub drop_rate: f64,
    #[arg(long, env = "SASRATE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct LogInput {
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; guessed from the extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// CSV field separator, e.g. '|' for legacy logs.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub log: LogInput,
    /// Corpus tag used as group and dataset id prefix, e.g. HD1.
    #[arg(long)]
    pub corpus: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep conversations whose user gender is unknown.
    #[arg(long)]
    pub keep_na: bool,
}

#[derive(Debug, Subcommand)]
pub enum AnnotateCmd {
    /// Majority vote over three annotators' `record_id,label` files.
    Aggregate {
        #[arg(long = "input", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, env = "SASRATE_SEED")]
        seed: Option<u64>,
        /// Aggregated `record_id,label` CSV, usable as `labels:FILE`.
        #[arg(long)]
        out: PathBuf,
        /// Agreement summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub log: LogInput,
    /// Write the statistics as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = FileConfig::load(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Generate(a) => commands::generate(&a, &cfg),
        Command::Evaluate(a) => commands::evaluate(&a, &cfg),
        Command::Rate(a) => commands::rate(&a, &cfg),
        Command::Roundtrip(RoundtripCmd { command: Some(RoundtripSub::Compare { before, after, out }), .. }) => {
            commands::compare(&before, &after, out.as_deref())
        }
        Command::Roundtrip(RoundtripCmd { command: None, run }) => commands::roundtrip(&run, &cfg),
        Command::Ingest(a) => commands::ingest(&a),
        Command::Annotate { command: AnnotateCmd::Aggregate { inputs, seed, out, summary } } => {
            commands::aggregate(&inputs, seed.or(cfg.seed).unwrap_or(0), &out, summary.as_deref())
        }
        Command::Stats(a) => commands::stats(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
