//! `drivernet` command-line tool.
//!
//! Exit codes: 0 success, 1 internal error, 2 input/data error,
//! 3 config/compatibility error, 4 latency budget exceeded.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RawConfig, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Internal(String),
    OverBudget { mean: f64, budget: f64 },
    Core(drivernet::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use drivernet::Error as E;
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::OverBudget { .. } => 4,
            CliError::Core(e) => match e {
                E::Config(_)
                | E::UnsupportedVersion(_)
                | E::NameMismatch { .. }
                | E::ShapeMismatch { .. }
                | E::UnsupportedDtype { .. }
                | E::TensorCount { .. }
                | E::UnsatisfiableSplit { .. } => 3,
                E::Data(_)
                | E::MissingFile(_)
                | E::MalformedRow { .. }
                | E::UnknownLabel { .. }
                | E::UnsupportedImage(_)
                | E::CorruptImage(_)
                | E::BadMagic(_)
                | E::Truncated(_)
                | E::Io(_) => 2,
                E::Shape(_) | E::Json(_) => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
            CliError::OverBudget { mean, budget } => {
                write!(f, "mean latency {mean:.4}s exceeds the {budget}s budget")
            }
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<drivernet::Error> for CliError {
    fn from(e: drivernet::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "drivernet", version, about = "Distracted-driver classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// cnn, cnn-opt, vgg16, vgg16-opt or resnet50.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Split by image instead of by driver. Demonstrates leakage only.
    #[arg(long, global = true)]
    leaky_split: bool,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    #[arg(long, global = true)]
    image: Option<PathBuf>,
    /// Any config key, e.g. `--set epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Class counts, per-class average images and difference images.
    Eda,
    /// Train the selected model; writes weights, history and a report.
    Train,
    /// Evaluate weights on the validation split or `eval_manifest`.
    Evaluate,
    /// Classify one image.
    Predict,
    /// Single-image latency; exit 4 when the mean exceeds the budget.
    Benchmark,
    /// Evaluate a weighted softmax-averaging ensemble of `members`.
    Ensemble,
    /// Write a synthetic corpus to `dataset_root`.
    Synth,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    let mut flags = RawConfig::default();
    let mut put = |k: &str, v: String| flags.set(k, &v).map_err(CliError::Config);
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        put(k.trim(), v.trim().to_string())?;
    }
    if let Some(s) = cli.seed {
        put("seed", s.to_string())?;
    }
    if let Some(m) = &cli.model {
        put("model", m.clone())?;
    }
    if cli.leaky_split {
        put("leaky_split", "true".into())?;
    }
    for (k, v) in [("output_dir", &cli.output_dir), ("weights", &cli.weights), ("image", &cli.image)] {
        if let Some(p) = v {
            put(k, p.display().to_string())?;
        }
    }
    raw.overlay(flags);
    RunConfig::resolve(&raw)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    cfg.write_resolved()?;
    match cli.command {
        Command::Eda => commands::eda(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Predict => commands::predict(&cfg),
        Command::Benchmark => commands::benchmark(&cfg),
        Command::Ensemble => commands::ensemble(&cfg),
        Command::Synth => commands::synth(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
