//! `ctdnn` command-line pipeline.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage or
//! configuration error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ctdnn", version, about = "TDNN/CTDNN speaker recognition pipeline")]
struct Cli {
    /// Log progress to stderr (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// WAV files to fixed-length MFCC feature files plus a manifest.
    Featurize(FeaturizeArgs),
    /// Write a synthetic feature corpus with split manifests.
    Synth(SynthArgs),
    /// Train a model on a feature manifest.
    Train(TrainArgs),
    /// Extract utterance embeddings.
    Embed(EmbedArgs),
    /// Fit an LDA projection on labelled embeddings.
    Lda(LdaArgs),
    /// Cosine-score verification trials.
    Score(ScoreArgs),
    /// Equal error rate of a score file.
    Eer(EerArgs),
    /// Closed-set top-1 identification accuracy.
    Identify(IdentifyArgs),
    /// Build a verification trial list from a manifest.
    Trials(TrialsArgs),
}

#[derive(Args)]
pub struct FeaturizeArgs {
    /// Directory scanned recursively; a file's first subdirectory names its speaker.
    #[arg(long)]
    pub wav_dir: PathBuf,
    /// Feature files go to `feats/` next to the manifest.
    #[arg(long)]
    pub manifest_out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Frames per utterance after length normalization.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Exit non-zero if any file fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    /// `key = value` corpus description; defaults when omitted.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Held-out manifest monitored for early stopping.
    #[arg(long)]
    pub val_manifest: Option<PathBuf>,
    /// `tdnn-paper`, `ctdnn-paper` or architecture text.
    #[arg(long)]
    pub arch: Option<String>,
    /// Hidden width for presets.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct LdaArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Output dimension, capped at classes - 1.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Within-class shrinkage; scaled to the scatter trace when omitted.
    #[arg(long)]
    pub shrinkage: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Project embeddings before scoring.
    #[arg(long)]
    pub lda: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EerArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub trials: PathBuf,
}

#[derive(Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Args)]
pub struct TrialsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Target and nontarget partners sampled per utterance.
    #[arg(long, default_value_t = 10)]
    pub pairs_per_utt: usize,
    /// Every unordered pair instead of a balanced sample.
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Marks an error as a usage or configuration problem (exit code 2).
#[derive(Debug)]
pub struct UsageError;

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid configuration")
    }
}

pub fn usage(e: anyhow::Error) -> anyhow::Error {
    e.context(UsageError)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let config_error = e.downcast_ref::<UsageError>().is_some()
        || e.chain().any(|c| {
            matches!(
                c.downcast_ref::<ctdnn::Error>(),
                Some(ctdnn::Error::Syntax { .. } | ctdnn::Error::Semantic { .. })
            )
        });
    if config_error {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Featurize(a) => commands::featurize(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Embed(a) => commands::embed(&a),
        Command::Lda(a) => commands::lda(&a),
        Command::Score(a) => commands::score(&a),
        Command::Eer(a) => commands::eer(&a),
        Command::Identify(a) => commands::identify(&a),
        Command::Trials(a) => commands::trials(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
