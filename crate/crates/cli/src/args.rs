use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "fishforge", version, about = "Synthetic FISH patches, joint contrastive training and uncertainty reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a labeled patch dataset with a manifest.
    Generate(GenerateArgs),
    /// Write a PNG grid of augmented views.
    PreviewAugment(PreviewArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Predict a dataset split and write per-patch probabilities.
    Eval(EvalArgs),
    /// Export representations R as CSV.
    Embed(EmbedArgs),
    /// Leave-one-out augmentation ablation.
    Ablation(AblationArgs),
    /// ECE with its over- and underconfidence parts.
    Calibrate(CalibrateArgs),
    /// Accuracy on the most certain fractions of predictions.
    Condition(ConditionArgs),
    /// Human certainty from annotator agreement.
    Agreement(AgreementArgs),
    /// Mean certainty per green signal count.
    #[command(alias = "signal-certainty")]
    ByCount(ByCountArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    Heavy,
    Light,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Joint,
    Ce,
    ClDetached,
    ClAttached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Generation spec JSON; the built-in demo spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Patches per class for the demo spec.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PreviewArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PresetArg::Heavy)]
    pub preset: PresetArg,
    /// Number of source patches (grid rows).
    #[arg(long, default_value_t = 6)]
    pub count: usize,
    /// Augmented views per patch.
    #[arg(long, default_value_t = 5)]
    pub views: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainOptions {
    #[arg(long, value_enum, default_value_t = ModeArg::Joint)]
    pub mode: ModeArg,
    /// Augmentation preset; heavy when omitted.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// CE epochs after contrastive pretraining; defaults to --epochs.
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the stratified 60/20/20 split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-5)]
    pub lr_min: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_max: f64,
    /// Warmup length in epochs.
    #[arg(long, default_value_t = 5.0)]
    pub warmup: f64,
    /// Cosine half-period in epochs.
    #[arg(long, default_value_t = 25.0)]
    pub cycle: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: TrainOptions,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AblationArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: TrainOptions,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ConditionArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Retain fractions, e.g. `100,95,50` (percent) or `1,0.95,0.5`.
    #[arg(long, default_value = "100,95,90,75,50,40,30,20,15,10,5")]
    pub retain: String,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AgreementArgs {
    /// Dataset directory holding the manifest.
    #[arg(long)]
    pub data: PathBuf,
    /// Annotation JSON files, one per annotator.
    #[arg(long, num_args = 1.., required = true)]
    pub annotations: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ByCountArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Optional annotation files for a human certainty column.
    #[arg(long, num_args = 1..)]
    pub annotations: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long)]
    pub force: bool,
}
