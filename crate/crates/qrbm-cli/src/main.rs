//! Experiment front-end: dataset building, training runs, thermometry
//! audits, baseline comparisons, all driven by flags or a config file.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod commands;
mod config;
mod samplers;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<qrbm::Error> for CliError {
    fn from(err: qrbm::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "qrbm", version, about = "RBM training against pluggable Boltzmann samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a compressed bit dataset from synthetic or ingested images.
    Dataset(DatasetArgs),
    /// Train an RBM and write metrics plus checkpoints.
    Train(TrainArgs),
    /// Thermometry reports over training checkpoints.
    Audit(AuditArgs),
    /// Join metrics files and compute accuracy ratios against a reference.
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct DatasetArgs {
    /// Image source: "synth" or "dir".
    #[arg(long)]
    source: Option<String>,
    /// Synthetic images per class.
    #[arg(long)]
    n: Option<usize>,
    /// Synthetic image side length in pixels.
    #[arg(long)]
    side: Option<usize>,
    /// Image directory (dir source).
    #[arg(long)]
    dir: Option<PathBuf>,
    /// filename,class manifest CSV (dir source).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Center-crop size (dir source).
    #[arg(long)]
    crop: Option<usize>,
    /// Feature bits per row (a multiple of 8; bits/8 PCA components).
    #[arg(long)]
    bits: Option<usize>,
    /// Fraction of images used to fit the PCA model and quantizer.
    #[arg(long)]
    fit_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory produced by `qrbm dataset`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// cd | sampler_generative | discriminative | hybrid | annealed_hybrid.
    #[arg(long)]
    algo: Option<String>,
    /// RBM shape as NxM (visible incl. class bit x hidden).
    #[arg(long)]
    rbm: Option<String>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Hybrid mix weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Epoch at which annealed_hybrid switches to discriminative updates.
    #[arg(long)]
    switch_epoch: Option<usize>,
    /// Sweeps per CD chain.
    #[arg(long)]
    cd_k: Option<usize>,
    /// Clip parameters to [-clip, clip] after each step.
    #[arg(long)]
    weight_clip: Option<f64>,
    /// Sampler temperature correction: off | at-start | every-step.
    #[arg(long)]
    beta_correction: Option<String>,
    /// Prior inverse-temperature guess for the correction.
    #[arg(long)]
    beta0: Option<f64>,
    /// Samples per temperature estimate.
    #[arg(long)]
    beta_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write a checkpoint every N epochs (the final epoch always gets one).
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct SamplerArgs {
    /// gibbs | sa | exact | chimera (seeds-only sources random | zeros are
    /// accepted where a sampler is used purely as a seed source).
    #[arg(long)]
    sampler: Option<String>,
    /// Samples per gradient step / audit draw.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Post-anneal Gibbs sweeps at beta = 1.
    #[arg(long)]
    post_sweeps: Option<usize>,
    /// Equilibration sweeps for the gibbs sampler.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    sa_beta_start: Option<f64>,
    #[arg(long)]
    sa_beta_end: Option<f64>,
    #[arg(long)]
    sa_sweeps: Option<usize>,
    /// Chimera grid size (default: smallest fitting the model).
    #[arg(long)]
    chimera_m: Option<usize>,
    /// Ferromagnetic chain coupling (default: 1.5 x max |logical J|).
    #[arg(long)]
    chain_strength: Option<f64>,
}

#[derive(Args)]
pub struct AuditArgs {
    #[command(subcommand)]
    report: AuditReport,
}

#[derive(Subcommand)]
enum AuditReport {
    /// Effective-temperature estimates per checkpoint.
    Beta(AuditBetaArgs),
    /// KS statistic against a Boltzmann reference per checkpoint.
    Ks(AuditKsArgs),
    /// Steps-to-Boltzmann curve per checkpoint.
    Steps(AuditStepsArgs),
    /// Bernoulli comparison of two seed sources.
    SeedAdvantage(AuditSeedArgs),
}

#[derive(Args)]
pub struct AuditCommonArgs {
    /// Directory holding ckpt_*.rbm files from `qrbm train`.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    /// Use every k-th checkpoint.
    #[arg(long)]
    every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct AuditBetaArgs {
    #[command(flatten)]
    common: AuditCommonArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Prior inverse-temperature guess.
    #[arg(long)]
    beta0: Option<f64>,
    /// Samples per draw.
    #[arg(long)]
    n: Option<usize>,
    /// Rolling-mean window over the estimates.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
pub struct AuditKsArgs {
    #[command(flatten)]
    common: AuditCommonArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Draws per side of the KS comparison.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
pub struct AuditStepsArgs {
    #[command(flatten)]
    common: AuditCommonArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Seed states per trial.
    #[arg(long)]
    n: Option<usize>,
    /// Trials averaged per checkpoint.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
pub struct AuditSeedArgs {
    #[command(flatten)]
    common: AuditCommonArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Seed source A (gibbs | sa | exact | chimera | random | zeros).
    #[arg(long)]
    sampler_a: Option<String>,
    /// Seed source B.
    #[arg(long)]
    sampler_b: Option<String>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Seed states per trial.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Metrics CSV files (at least two) with a shared epoch axis.
    #[arg(long, num_args = 2.., required = true)]
    runs: Vec<PathBuf>,
    /// Reference run (file stem); defaults to the first run.
    #[arg(long)]
    reference: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::Dataset(args) => commands::run_dataset(args),
        Command::Train(args) => commands::run_train(args),
        Command::Audit(args) => match args.report {
            AuditReport::Beta(a) => commands::run_audit_beta(a),
            AuditReport::Ks(a) => commands::run_audit_ks(a),
            AuditReport::Steps(a) => commands::run_audit_steps(a),
            AuditReport::SeedAdvantage(a) => commands::run_audit_seed_advantage(a),
        },
        Command::Compare(args) => commands::run_compare(args),
    };
    match outcome {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}
