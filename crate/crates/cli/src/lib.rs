//! Command-line frontend: dataset registration, training, scoring, protocol
//! reproduction, K sweeps, theory checks and plot data.

mod commands;
mod context;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neutral_core::data::TabularKind;
use neutral_core::model::Objective;
use neutral_core::nn::Parametrization;
use neutral_core::plot::PlotKind;

pub use context::{CliConfig, Context};

#[derive(Debug, Parser)]
#[command(name = "neutral-ad", version, about = "Anomaly detection with learnable transformations")]
pub struct Cli {
    /// Base seed for data splits, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// TOML file with an optional `registry` path and a `[train]` table.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Dataset registry (default: config `registry`, then
    /// $NEUTRAL_AD_REGISTRY, then ./datasets.toml).
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add a dataset to the registry after checking that it loads.
    RegisterDataset(RegisterArgs),
    /// Train on one split; writes a checkpoint and a JSON report.
    Train(TrainArgs),
    /// Score samples with a checkpoint; writes id, total and per-transformation terms.
    Score(ScoreArgs),
    /// Run a results table over registered datasets.
    Reproduce(ReproduceArgs),
    /// Metric against K for each parametrization.
    Sweep(SweepArgs),
    /// Check the losses against their closed forms at the degenerate solutions.
    VerifyTheory(TheoryArgs),
    /// Emit plot data as CSV (and optionally SVG).
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    pub name: String,
    /// Training `.ts` file of an archive time-series dataset.
    #[arg(long, requires = "test", conflicts_with = "table")]
    pub train: Option<PathBuf>,
    /// Test `.ts` file.
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Tabular data file.
    #[arg(long, requires = "format")]
    pub table: Option<PathBuf>,
    /// arrhythmia, thyroid, kdd, kddrev or csv.
    #[arg(long)]
    pub format: Option<TabularKind>,
}

/// Training settings that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    /// Number of learned transformations.
    #[arg(long = "k")]
    pub k: Option<usize>,
    /// feed_forward, residual or multiplicative.
    #[arg(long)]
    pub mode: Option<Parametrization>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// Temperature of the contrastive loss.
    #[arg(long = "tau")]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// dcl or tp_fixed.
    #[arg(long)]
    pub objective: Option<Objective>,
    /// Skip standardization with training statistics.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: String,
    /// Normal class (one-vs-rest), or first class of the n-vs-rest window.
    #[arg(long, default_value_t = 0)]
    pub normal_class: usize,
    /// Treat `n` consecutive classes as normal.
    #[arg(long)]
    pub n_vs_rest: Option<usize>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `.ts` file, or CSV with one sample per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to `<out>/scores.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    #[value(name = "ts_one_vs_rest")]
    TsOneVsRest,
    #[value(name = "ts_n_vs_rest")]
    TsNVsRest,
    #[value(name = "tabular")]
    Tabular,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    pub table: Table,
    /// Comma-separated subset (default: every dataset of the table).
    #[arg(long, alias = "dataset", value_delimiter = ',')]
    pub datasets: Vec<String>,
    /// Comma-separated seeds (default: five seeds from --seed).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Window size for ts_n_vs_rest (default N-1).
    #[arg(long)]
    pub n: Option<usize>,
    /// Add the fixed-transformation baseline column (time series only).
    #[arg(long)]
    pub with_fixed_ts: bool,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    #[value(name = "one_vs_rest")]
    OneVsRest,
    #[value(name = "n_vs_rest")]
    NVsRest,
    #[value(name = "tabular")]
    Tabular,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: String,
    /// Comma-separated K values (default 2..=15).
    #[arg(long = "ks", value_delimiter = ',')]
    pub ks: Vec<usize>,
    /// Comma-separated parametrizations (default all three).
    #[arg(long, value_delimiter = ',')]
    pub modes: Vec<Parametrization>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Defaults to one_vs_rest for series and tabular for tables.
    #[arg(long)]
    pub protocol: Option<ProtocolArg>,
    /// Window size for n_vs_rest (default N-1).
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Numbers of transformations.
    #[arg(long = "K", value_delimiter = ',')]
    pub ks: Vec<usize>,
    /// Constants of the constant edge case.
    #[arg(long = "C", value_delimiter = ',')]
    pub cs: Vec<f64>,
    /// Temperatures.
    #[arg(long = "tau", value_delimiter = ',')]
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Data,
    Embedding,
    Both,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// score_histogram, pca_projection, mask_heatmap, simplex_scores or sweep_curve.
    pub kind: PlotKind,
    /// Checkpoint written by `train`; its split is rebuilt for test data.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Sweep JSON written by `sweep` (for sweep_curve).
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Samples per class for projections and masks.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = SpaceArg::Both)]
    pub space: SpaceArg,
    /// Also render a static SVG.
    #[arg(long)]
    pub svg: bool,
}

/// Raised when a theory check does not match its closed form.
#[derive(Debug)]
pub struct TheoryFailure(pub String);

impl std::fmt::Display for TheoryFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "theory checks failed: {}", self.0)
    }
}

impl std::error::Error for TheoryFailure {}

/// Runs one parsed command.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Context::new(&cli)?;
    match cli.command {
        Command::RegisterDataset(a) => commands::register(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Score(a) => commands::score(&ctx, a),
        Command::Reproduce(a) => commands::reproduce(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::VerifyTheory(a) => commands::verify_theory(&ctx, a),
        Command::Plot(a) => commands::plot(&ctx, a),
    }
}

/// 2 for configuration, data and shape errors; 3 for divergence; 1 for
/// failed checks and anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use neutral_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Diverged { .. } => 3,
                E::UndefinedMetric(_) => 1,
                _ => 2,
            };
        }
        if cause.is::<TheoryFailure>() {
            return 1;
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}
