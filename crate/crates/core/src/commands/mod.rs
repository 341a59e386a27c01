//! The `pdeeg` command-line surface. Each subcommand is a plain function so
//! it can be driven from tests and examples as well as from the binary.

mod config;
mod run;

pub use config::RunConfig;
pub use run::{cmd_ablation, cmd_crossval, cmd_evaluate, cmd_gradcheck, cmd_preprocess, cmd_search, cmd_synth};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dataio::DataError;
use crate::model::ModelError;
use crate::signal::SignalError;
use crate::train::TrainError;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Bad flags, config keys or values.
pub const EXIT_USAGE: i32 = 2;
/// Unreadable, malformed or inconsistent data.
pub const EXIT_DATA: i32 = 3;
/// Divergence or a failed gradient check.
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Numerical(String),
}

fn model_code(e: &ModelError) -> i32 {
    match e {
        ModelError::Config(_) => EXIT_USAGE,
        ModelError::Input { .. } | ModelError::Checkpoint { .. } => EXIT_DATA,
        ModelError::Autodiff(_) => EXIT_NUMERICAL,
    }
}

fn train_code(e: &TrainError) -> i32 {
    match e {
        TrainError::Diverged { .. } => EXIT_NUMERICAL,
        TrainError::Config(_) => EXIT_USAGE,
        TrainError::Plan(_) | TrainError::Hygiene(_) => EXIT_DATA,
        TrainError::Fold { source, .. } => train_code(source),
        TrainError::Model(m) => model_code(m),
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Signal(_) => EXIT_DATA,
            CliError::Model(m) => model_code(m),
            CliError::Train(t) => train_code(t),
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pdeeg", version, about = "EEG Parkinson's classifier: synthesis, preprocessing, cross-validation and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic EEG corpus and its manifest.
    Synth(SynthArgs),
    /// Montage, resample, band-pass, optional ICA, segment and standardize a corpus.
    Preprocess(PreprocessArgs),
    /// Ten-fold or leave-one-subject-out cross-validation.
    Crossval(CrossvalArgs),
    /// Score a frozen checkpoint on a segment set.
    Evaluate(EvaluateArgs),
    /// Cross-validate the five-rung architecture ladder.
    Ablation(AblationArgs),
    /// Random hyperparameter search scored on validation accuracy.
    Search(SearchArgs),
    /// Finite-difference check of every op and of the full model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML synthetic-corpus spec; defaults are used for absent keys.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Corpus manifest (manifest.json).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Channel montage: biosemi32 (Pz may be zero-filled) or biosemi32-strict.
    #[arg(long, default_value = "biosemi32")]
    pub montage: String,
    /// Output directory for segments.bin and summary.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep raw amplitudes instead of per-segment channel z-scores.
    #[arg(long)]
    pub no_standardize: bool,
    /// Comma-separated ICA component indices to remove; enables ICA.
    #[arg(long, value_delimiter = ',')]
    pub ica_reject: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Preprocessed segment directory.
    #[arg(long, env = "PDEEG_DATA_DIR")]
    pub data: PathBuf,
    /// Flat TOML config with model, training and run keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the training seed (and the split seed unless the config sets one).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds trained in parallel.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// kfold10 or loocv; overrides the config.
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint written by crossval.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Preprocessed segment directory.
    #[arg(long, env = "PDEEG_DATA_DIR")]
    pub data: PathBuf,
    /// segment or subject.
    #[arg(long, default_value = "segment")]
    pub level: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected model config; a checkpoint with a different architecture is rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fold plan (plan.json); restricts scoring to the test set of the checkpoint's fold.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Decision threshold; defaults to the checkpoint's.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// kfold10 or loocv; overrides the config.
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of sampled configurations.
    #[arg(long)]
    pub budget: usize,
    /// TOML search space; defaults to the full tuning intervals.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Train only the first N folds of the plan per trial.
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Model config to check; defaults to the full-size model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sampled model parameters.
    #[arg(long, default_value_t = 25)]
    pub params: usize,
    /// Input batch size for the model check.
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Dispatch a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Crossval(a) => cmd_crossval(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Ablation(a) => cmd_ablation(&a),
        Command::Search(a) => cmd_search(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
