//! Command-line driver for the probing, direction-fitting, blocking, and
//! steering experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use halo_core::{Error, ErrorKind};

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Model(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    fn model(msg: impl Into<String>) -> Self {
        Self::Model(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Model(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Model(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e.kind() {
            ErrorKind::Model => Self::Model(e.to_string()),
            ErrorKind::Data => Self::Data(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "halo",
    version,
    about = "Probe how a transformer's final hidden state reacts to correct versus hallucinated answers",
    after_help = "Every flag mirrors a field of the JSON experiment config; flags override the file."
)]
struct Cli {
    /// JSON experiment config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Weight bundle path.
    #[arg(long, global = true, value_name = "PATH")]
    model: Option<PathBuf>,

    /// Model config JSON path.
    #[arg(long = "model-config", global = true, value_name = "PATH")]
    model_config: Option<PathBuf>,

    /// Tokenizer JSON path (omit for the byte-level tokenizer).
    #[arg(long, global = true, value_name = "PATH")]
    tokenizer: Option<PathBuf>,

    /// Dataset file.
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,

    /// Dataset format: truthfulqa_csv, halueval_jsonl, generic_jsonl.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Category filter: adversarial or non_adversarial.
    #[arg(long = "category-filter", global = true)]
    category_filter: Option<String>,

    /// Subsample size (seeded, portable selection).
    #[arg(long = "sample-n", global = true)]
    sample_n: Option<usize>,

    /// Prompting strategy: none, pro, anti.
    #[arg(long, global = true)]
    strategy: Option<String>,

    /// Include reference knowledge in the inputs.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    knowledge: Option<bool>,

    /// Steering strength.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Comma-separated blocking thresholds for sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    thresholds: Option<Vec<usize>>,

    /// Tokens per direction in the ranking table.
    #[arg(long = "top-k", global = true)]
    top_k: Option<usize>,

    /// Tokens to generate per steer prompt.
    #[arg(long = "max-new-tokens", global = true)]
    max_new_tokens: Option<usize>,

    /// Direction bundle for steer.
    #[arg(long, global = true, value_name = "PATH")]
    directions: Option<PathBuf>,

    /// Ad-hoc prompt for steer (instead of a dataset).
    #[arg(long, global = true)]
    prompt: Option<String>,

    /// Subsampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract awareness scores and test them against zero.
    Probe,
    /// Fit transition directions, rank tokens, and regress projections.
    Directions,
    /// Attention-blocking effect sizes across layer thresholds.
    Sweep,
    /// Compare plain and direction-steered generations.
    Steer,
    /// Run the internal oracles (PCA, t-tail, blocking).
    Selfcheck,
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };

    macro_rules! take {
        ($field:ident) => {
            if let Some(v) = &cli.$field {
                cfg.$field = Some(v.clone());
            }
        };
    }
    take!(model);
    take!(model_config);
    take!(tokenizer);
    take!(dataset);
    take!(directions);
    take!(prompt);

    if let Some(sample_n) = cli.sample_n {
        cfg.sample_n = Some(sample_n);
    }
    if let Some(format) = &cli.format {
        cfg.format = format
            .parse()
            .map_err(|e: Error| CliError::usage(e.to_string()))?;
    }
    if let Some(filter) = &cli.category_filter {
        cfg.category_filter = Some(
            filter
                .parse()
                .map_err(|e: Error| CliError::usage(e.to_string()))?,
        );
    }
    if let Some(strategy) = &cli.strategy {
        cfg.strategy = match strategy.as_str() {
            "none" => halo_core::StrategyKind::None,
            "pro" => halo_core::StrategyKind::Pro,
            "anti" => halo_core::StrategyKind::Anti,
            other => return Err(CliError::usage(format!("unknown strategy `{other}`"))),
        };
    }
    if let Some(knowledge) = cli.knowledge {
        cfg.knowledge = knowledge;
    }
    if let Some(alpha) = cli.alpha {
        cfg.alpha = alpha;
    }
    if let Some(thresholds) = &cli.thresholds {
        cfg.thresholds = thresholds.clone();
    }
    if let Some(top_k) = cli.top_k {
        cfg.top_k = top_k;
    }
    if let Some(max_new_tokens) = cli.max_new_tokens {
        cfg.max_new_tokens = max_new_tokens;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    match cli.command {
        Command::Probe => commands::cmd_probe(&cfg),
        Command::Directions => commands::cmd_directions(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Steer => commands::cmd_steer(&cfg),
        Command::Selfcheck => commands::cmd_selfcheck(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version print and succeed; anything else is a
            // usage error.
            use clap::error::ErrorKind as ClapKind;
            let _ = e.print();
            return match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
