use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "drf", version, about = "Distribution-based feature recovery and fusion on synthetic image-text data")]
pub struct Cli {
    /// TOML file with [generator], [disruption], [train] and [sweep] sections.
    /// Flags override values from the file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (train/val/test splits).
    Gen(GenArgs),
    /// Train DRF or the concat baseline on a dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint under a disruption.
    Eval(EvalArgs),
    /// Train and evaluate both models over a disruption grid.
    Sweep(SweepArgs),
    /// Summarise a sweep result table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub image_dim: Option<usize>,
    #[arg(long)]
    pub text_dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub mismatch_rate: Option<f64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct DisruptionArgs {
    /// fixed or random.
    #[arg(long)]
    pub strategy: Option<String>,
    /// C, D or C+D.
    #[arg(long)]
    pub setting: Option<String>,
    /// Disruption ratio for the random strategy.
    #[arg(long)]
    pub dr: Option<f64>,
    /// Disrupted modality for the fixed strategy (image or text).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub disrupt_seed: Option<u64>,
    /// Masked fraction range as `low,high`.
    #[arg(long)]
    pub corrupt_range: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initialisation and shuffling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr_encoders: Option<f64>,
    #[arg(long)]
    pub lr_rest: Option<f64>,
    #[arg(long)]
    pub queue_capacity: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Queue admission rule: mean, least or always.
    #[arg(long)]
    pub gate: Option<String>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Divide branch weights by their sum.
    #[arg(long)]
    pub normalize_weights: bool,
    /// Equal weights on every branch instead of Gaussian quality scores.
    #[arg(long)]
    pub uniform_weights: bool,
    #[arg(long)]
    pub no_pair_expansion: bool,
    #[arg(long)]
    pub no_distribution_constraint: bool,
    #[arg(long)]
    pub no_sample_recovery: bool,
    #[arg(long)]
    pub no_distribution_recovery: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// drf or baseline.
    #[arg(long, default_value = "drf")]
    pub model: String,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub disruption: DisruptionArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
    #[command(flatten)]
    pub disruption: DisruptionArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
    /// fixed or random.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Comma-separated settings, e.g. `C,D,C+D`.
    #[arg(long)]
    pub settings: Option<String>,
    /// Comma-separated disruption ratios.
    #[arg(long = "dr")]
    pub drs: Option<String>,
    /// Comma-separated fixed-strategy targets.
    #[arg(long)]
    pub targets: Option<String>,
    /// Comma-separated training seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma-separated models (drf, baseline).
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub corrupt_range: Option<String>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Result table written by `sweep`.
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
    /// Also render one SVG line chart per setting.
    #[arg(long)]
    pub svg: bool,
}
