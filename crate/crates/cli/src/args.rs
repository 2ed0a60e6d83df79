use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use nlbench_core::datasets::Role;
use nlbench_core::filters::Method;
use nlbench_core::scenarios::ScenarioKind;

#[derive(Debug, Parser)]
#[command(
    name = "nlbench",
    version,
    about = "Nonlinear state-estimation benchmark pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset (or a train/val/eval triple) into NLFB files.
    Generate(GenerateArgs),
    /// Train a GRU estimator on a train/val pair.
    Train(TrainArgs),
    /// Run one estimator over a dataset and write its estimates.
    Filter(FilterArgs),
    /// Score estimators over evaluation sets and seeds.
    Evaluate(EvaluateArgs),
    /// Score estimators at several observation-noise levels.
    SweepNoise(SweepArgs),
    /// Measure estimator throughput in iterations per second.
    Bench(BenchArgs),
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    s.parse()
        .map_err(|e: nlbench_core::scenarios::ScenarioError| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
        .map_err(|e: nlbench_core::filters::FilterError| e.to_string())
}

fn parse_role(s: &str) -> Result<Role, String> {
    s.parse()
        .map_err(|e: nlbench_core::datasets::DatasetError| e.to_string())
}

/// Filter tuning shared by every command that runs filters.
#[derive(Debug, Clone, Default, Args)]
pub struct TuningArgs {
    /// Particle count for the particle filter.
    #[arg(long)]
    pub np: Option<usize>,
    /// Ensemble size for the ensemble Kalman filter.
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// JSON overrides: {"scenario": {...}, "filters": [...], "training": {...}}.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioKind>,
    /// Write a single set with this role; without it, write train, val and eval.
    #[arg(long, value_parser = parse_role)]
    pub role: Option<Role>,
    /// Number of trajectories (chunks for train and val).
    #[arg(long)]
    pub n: Option<usize>,
    /// Steps per trajectory, or per chunk for train and val.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplies the observation-noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    /// JSON overrides; only the "scenario" entry is used here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file with --role, output directory without it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "train")]
    pub train_set: PathBuf,
    #[arg(long = "val")]
    pub val_set: PathBuf,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Initialization and shuffling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Trained model, required for gru.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplies the observation-noise standard deviation the filter assumes.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Evaluation sets, one per dataset seed.
    #[arg(long = "eval", required = true, num_args = 1..)]
    pub eval_sets: Vec<PathBuf>,
    /// Comma-separated or repeated; defaults to the classical filters, plus gru when models are given.
    #[arg(long, value_parser = parse_method, value_delimiter = ',')]
    pub method: Vec<Method>,
    /// Trained models, grouped by evaluation set in the order the sets are given.
    #[arg(long, num_args = 1..)]
    pub model: Vec<PathBuf>,
    /// Filter seeds per evaluation set.
    #[arg(long, default_value_t = 5)]
    pub init_seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long, value_parser = parse_method, value_delimiter = ',')]
    pub method: Vec<Method>,
    /// Trained model for gru; it is not retrained per noise level.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Dataset seed, interpreted as for `generate --role eval`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0, 8.0])]
    pub factors: Vec<f64>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioKind>,
    /// Defaults to all five methods plus the no-op reference.
    #[arg(long, value_parser = parse_method, value_delimiter = ',')]
    pub method: Vec<Method>,
    /// Also time the no-op reference when --method is given.
    #[arg(long)]
    pub noop: bool,
    /// Trained model for gru; an untrained network of --hidden units is timed otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Batch size: trajectories stepped per iteration.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Defaults to warmup + iters so no trajectory wraps around.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = nlbench_core::bench::DEFAULT_WARMUP)]
    pub warmup: usize,
    #[arg(long, default_value_t = nlbench_core::bench::DEFAULT_ITERS)]
    pub iters: usize,
    /// Step the batch on the thread pool and report aggregate throughput.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long)]
    pub out: PathBuf,
}
