//! `steerage` — single executable exposing the steering pipeline as
//! subcommands: `init-toy`, `extract`, `tune`, `eval`, `analyze`, `plot`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/config error. Errors
//! print one machine-parsable line to stderr: `error: <kind>: <message>`.

mod commands;
mod config;
mod svg;
mod toy_data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use steerage_core::analysis::Measure;
use steerage_core::transfer::AdapterKind;

use crate::config::RunConfig;

/// clap-facing mirror of [`AdapterKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdapterKindArg {
    Identity,
    TruncateOrPad,
    SeededProjection,
}

impl From<AdapterKindArg> for AdapterKind {
    fn from(a: AdapterKindArg) -> Self {
        match a {
            AdapterKindArg::Identity => AdapterKind::Identity,
            AdapterKindArg::TruncateOrPad => AdapterKind::TruncateOrPad,
            AdapterKindArg::SeededProjection => AdapterKind::SeededProjection,
        }
    }
}

/// clap-facing mirror of [`Measure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Pearson,
    Cosine,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Pearson => Measure::Pearson,
            MeasureArg::Cosine => Measure::Cosine,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime_msg(msg: impl Into<String>) -> Self {
        CliError::Runtime(anyhow::anyhow!(msg.into()))
    }
}

impl From<steerage_core::Error> for CliError {
    fn from(e: steerage_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Parser)]
#[command(
    name = "steerage",
    version,
    about = "Extract concept steering vectors, transfer them across models, tune lambda, and evaluate"
)]
struct Cli {
    /// Verbose logging to stderr
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a self-contained toy workspace (models, data splits, config)
    InitToy(InitToyArgs),
    /// Extract per-layer steering vectors from the source model
    Extract(ExtractArgs),
    /// Sweep the lambda grid on the validation split and pick lambda_best
    Tune(TuneArgs),
    /// Evaluate the test split at a fixed lambda or with inference-time scaling
    Eval(EvalArgs),
    /// Compare two steering sets layer by layer
    Analyze(AnalyzeArgs),
    /// Render a summary or matrix file to a static SVG image
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyFlavor {
    /// Hand-specified chain emitter with a planted concept channel
    Planted,
    /// Seeded random weights
    Random,
}

#[derive(Args)]
pub struct InitToyArgs {
    /// Directory to create the toy workspace in
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ToyFlavor::Planted)]
    pub flavor: ToyFlavor,
    #[arg(long, default_value_t = 6)]
    pub source_layers: usize,
    #[arg(long, default_value_t = 4)]
    pub target_layers: usize,
    /// Hidden width (random flavor only; the planted models are 16-wide)
    #[arg(long, default_value_t = 16)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub num_heads: usize,
    #[arg(long, default_value_t = 512)]
    pub max_context: usize,
    /// Records per split
    #[arg(long, default_value_t = 16)]
    pub train: usize,
    #[arg(long, default_value_t = 10)]
    pub val: usize,
    #[arg(long, default_value_t = 12)]
    pub test: usize,
    /// Few-shot exemplar count written into the generated config
    #[arg(long, default_value_t = 2)]
    pub few_shot: usize,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Run configuration file (TOML); flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source model file (overrides paths.source_model)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training split (overrides paths.train_split)
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output steering-set file (overrides paths.steering_set)
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dataset_id: Option<String>,
    /// Diagonalize the raw second moment instead of centering first
    #[arg(long)]
    pub uncentered: bool,
    /// Swap the contrastive template polarity
    #[arg(long)]
    pub swapped_template: bool,
}

/// Overrides shared by tune and eval.
#[derive(Args)]
pub struct CommonRunArgs {
    /// Target model file (overrides paths.target_model)
    #[arg(long)]
    pub target_model: Option<PathBuf>,
    /// Steering-set file (overrides paths.steering_set)
    #[arg(long)]
    pub steering_set: Option<PathBuf>,
    /// Output directory (overrides paths.output_dir)
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Split file override (val for tune, test for eval)
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub few_shot: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub adapter: Option<AdapterKindArg>,
    #[arg(long)]
    pub adapter_seed: Option<u64>,
}

impl CommonRunArgs {
    fn apply_to(&self, config: &mut RunConfig, split_is_val: bool) {
        if let Some(p) = &self.target_model {
            config.paths.target_model = Some(p.clone());
        }
        if let Some(p) = &self.steering_set {
            config.paths.steering_set = Some(p.clone());
        }
        if let Some(p) = &self.output_dir {
            config.paths.output_dir = Some(p.clone());
        }
        if let Some(p) = &self.split {
            if split_is_val {
                config.paths.val_split = Some(p.clone());
            } else {
                config.paths.test_split = Some(p.clone());
            }
        }
        if let Some(v) = self.few_shot {
            config.run.few_shot = v;
        }
        if let Some(v) = self.workers {
            config.run.workers = v;
        }
        if let Some(v) = self.max_new_tokens {
            config.generation.max_new_tokens = v;
        }
        if let Some(v) = self.temperature {
            config.generation.temperature = v;
        }
        if let Some(v) = self.seed {
            config.generation.seed = v;
        }
        if let Some(k) = self.adapter {
            config.adapter.kind = k.into();
        }
        if let Some(s) = self.adapter_seed {
            config.adapter.seed = s;
        }
    }
}

#[derive(Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated lambda values overriding the default grid
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub common: CommonRunArgs,
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("mode").required(true).args(["with_its", "lambda"]),
))]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Evaluate across the whole grid and aggregate answers by mode
    #[arg(long)]
    pub with_its: bool,
    /// Evaluate at one fixed lambda
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated lambda values overriding the default grid (ITS only)
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub common: CommonRunArgs,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// First steering-set file (matrix rows)
    #[arg(long)]
    pub set_a: PathBuf,
    /// Second steering-set file (matrix columns)
    #[arg(long)]
    pub set_b: PathBuf,
    /// Output CSV path
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = MeasureArg::Cosine)]
    pub measure: MeasureArg,
    /// Adapter for width mismatches (maps set B onto set A's width)
    #[arg(long, value_enum)]
    pub adapter: Option<AdapterKindArg>,
    #[arg(long, default_value_t = 0)]
    pub adapter_seed: u64,
    /// Also report the explained-variance profile correlation
    #[arg(long)]
    pub explained_variance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Accuracy-vs-lambda curve from a sweep summary
    Sweep,
    /// Per-lambda and aggregated accuracy bars from an ITS summary
    Its,
    /// Layerwise alignment heatmap from an exported matrix CSV
    Heatmap,
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub input: PathBuf,
    /// Output image path (SVG)
    #[arg(long)]
    pub output: PathBuf,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::InitToy(args) => commands::cmd_init_toy(args),
        Command::Extract(args) => commands::cmd_extract(args),
        Command::Tune(args) => commands::cmd_tune(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Analyze(args) => commands::cmd_analyze(args),
        Command::Plot(args) => commands::cmd_plot(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "info"
    } else {
        "warn"
    }))
    .init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: usage: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: runtime: {e:#}");
            ExitCode::from(1)
        }
    }
}
