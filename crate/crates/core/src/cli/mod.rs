//! The `tvgan` command line: `train`, `sample`, `evaluate-fid`,
//! `compute-tv`, `ablate-lambda` and `synth`.
//!
//! Exit codes: 0 on success, 1 on runtime failures (including divergence),
//! 2 on usage or configuration errors.

mod ablate;
mod commands;
mod manifest;
mod output;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use ablate::{
    mean_std, parse_list, run_ablation, run_dir_name, AblationPlan, AblationReport, AblationRow, AblationRun,
    RUNS_HEADER, SUMMARY_HEADER,
};
pub use manifest::{
    checkpoint_name, grid_name, Layout, RunInfo, RunManifest, RunStatus, Timings, CHECKPOINT_DIR, CODE_VERSION,
    GRID_DIR, MANIFEST_FILE, TRACE_FILE,
};
pub use output::{grid_image, grid_shape, write_grid, write_npy, GRID_PAD};
pub use run::{grid_seed, train_run, RunOptions, RunOutcome, GRID_SAMPLES};

use crate::fid::EmbedderKind;
use crate::Error;

pub const RUNS_DIR_ENV: &str = "TVGAN_RUNS_DIR";
pub const DEFAULT_RUNS_DIR: &str = "runs";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tvgan", version = CODE_VERSION, about = "TV-regularized DC-GAN for line-textured images")]
pub struct Cli {
    /// Output root for run directories (default: $TVGAN_RUNS_DIR or ./runs).
    #[arg(long, global = true)]
    pub runs_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Draw samples from a checkpoint as a PNG grid and a .npy batch.
    Sample(SampleArgs),
    /// FID between a real image directory and a checkpoint or image directory.
    EvaluateFid(FidArgs),
    /// Per-image total variation of an image file or directory.
    ComputeTv(TvArgs),
    /// Train one run per (λ, seed) and compare sample TV and FID.
    AblateLambda(AblateArgs),
    /// Write a synthetic palm-line dataset as PNG files.
    Synth(SynthArgs),
}

/// Training hyperparameters. Precedence: flags over `--set` over the
/// config file over defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the CPU desk-scale preset instead of the full defaults.
    #[arg(long, conflicts_with = "config")]
    pub desk: bool,
    /// Generic `key=value` override; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub lambda_tv: Option<f64>,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub base_width: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    #[arg(long, conflicts_with = "synthetic")]
    pub data_dir: Option<PathBuf>,
    /// Train on the built-in synthetic palm-line generator.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub synthetic_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Run directory name under the runs root.
    #[arg(long)]
    pub name: Option<String>,
    /// Explicit run directory (overrides --name and the runs root).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, requires = "resume")]
    pub allow_config_mismatch: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path stem; writes `<out>.png` and `<out>.npy`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FidArgs {
    /// Directory of real images.
    #[arg(long)]
    pub real: PathBuf,
    /// Checkpoint file or directory of generated images.
    #[arg(long)]
    pub generated: PathBuf,
    /// Samples drawn from a checkpoint (default: as many as real images).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = EmbedderKind::RandomConv)]
    pub embedder: EmbedderKind,
    #[arg(long, default_value_t = 0)]
    pub embedder_seed: u64,
    /// Resize both sides to this size (default: the checkpoint's, else 64).
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Real-side statistics cache; read if present, written otherwise.
    #[arg(long)]
    pub real_stats: Option<PathBuf>,
    #[arg(long)]
    pub model_name: Option<String>,
    /// CSV report path (default: <runs root>/fid_report.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TvScale {
    /// Gray levels mapped to [-1, 1], the training scale.
    Normalized,
    /// Gray levels divided by 255.
    Unit,
    /// Raw gray levels in [0, 255].
    Raw,
}

#[derive(Debug, Args)]
pub struct TvArgs {
    /// Image file or directory.
    pub path: PathBuf,
    #[arg(long, value_enum, default_value_t = TvScale::Normalized)]
    pub scale: TvScale,
    /// CSV output path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated λ values.
    #[arg(long, default_value = "0,1e-4")]
    pub lambdas: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2")]
    pub seeds: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Maximum concurrent runs.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long, default_value_t = EmbedderKind::RandomConv)]
    pub embedder: EmbedderKind,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub class_seed: u64,
    #[arg(long)]
    pub line_count: Option<usize>,
    /// Index of the first image, for writing disjoint parts of one class.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Config(_) | Error::FingerprintMismatch => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

impl Cli {
    pub fn runs_root(&self) -> PathBuf {
        self.runs_dir
            .clone()
            .or_else(|| std::env::var_os(RUNS_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_RUNS_DIR))
    }

    pub fn execute(&self) -> CliResult {
        let root = self.runs_root();
        match &self.command {
            Command::Train(a) => commands::train(a, &root),
            Command::Sample(a) => commands::sample(a, &root),
            Command::EvaluateFid(a) => commands::evaluate_fid(a, &root),
            Command::ComputeTv(a) => commands::compute_tv(a),
            Command::AblateLambda(a) => commands::ablate(a, &root),
            Command::Synth(a) => commands::synth(a),
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.execute() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
