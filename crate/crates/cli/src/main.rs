//! `pnpmri`: generate training lines, train the denoiser, reconstruct and
//! sweep.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<pnpmri::Error> for CliError {
    fn from(e: pnpmri::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "pnpmri", version, about = "Plug-and-play MRI reconstruction with a synthetic-data 1D denoiser")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// TOML file of `key = value` defaults, keyed by long flag name.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate paired clean/noisy training lines.
    GenData(GenDataArgs),
    /// Train the 1D denoiser.
    Train(TrainArgs),
    /// Reconstruct one phantom from simulated undersampled k-space.
    Reconstruct(ReconstructArgs),
    /// Score methods over a grid of patterns and rates.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub total: Option<usize>,
    #[arg(long)]
    pub line_length: Option<usize>,
    #[arg(long)]
    pub snr_min: Option<f64>,
    #[arg(long)]
    pub snr_max: Option<f64>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `procedural` or `dir:PATH` (8/16-bit PGM files).
    #[arg(long)]
    pub source: Option<String>,
    /// Rows drawn from each source image.
    #[arg(long)]
    pub lines_per_image: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Defaults to `<data>.split.json`.
    #[arg(long)]
    pub split_manifest: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// 30 epochs unless `--epochs` is given.
    #[arg(long)]
    pub desk_scale: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// `shepp`, `brainlike:SEED` or `file:PATH`.
    #[arg(long)]
    pub phantom: Option<String>,
    /// Side length of generated phantoms.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub coils: Option<usize>,
    #[arg(long)]
    pub pattern: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub center_fraction: Option<f64>,
    /// Measurement SNR in dB; `inf` for noiseless.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub denoiser: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub zero_phase: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated patterns.
    #[arg(long)]
    pub patterns: Option<String>,
    /// `r1,r2,…` for every pattern, or `pattern=r1,r2;pattern=…`.
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated `shepp`, `brainlike:SEED`, `file:PATH`.
    #[arg(long)]
    pub cases: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub coils: Option<usize>,
    #[arg(long)]
    pub center_fraction: Option<f64>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub zero_phase: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let mut layers = config::Layers::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenData(a) => commands::gen_data(a, &mut layers),
        Command::Train(a) => commands::train(a, &mut layers),
        Command::Reconstruct(a) => commands::reconstruct(a, &mut layers),
        Command::Sweep(a) => commands::sweep(a, &mut layers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
