//! halfsplit command-line interface.
//!
//! Exit codes are a stable contract for harnesses:
//! 0 success, 2 usage, 3 data/parse, 4 dimension/input, 5 internal.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use halfsplit::shard::{Backend, ShardConfig};
use halfsplit::tree::SelectionMetric;
use halfsplit::Error;

#[derive(Parser)]
#[command(
    name = "halfsplit",
    version,
    about = "Multi-class linear classification via a cross-validated class-bipartition tree,\n\
             with one-vs-one and one-vs-rest baselines on the same solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to disk as JSON.
    Train(TrainArgs),
    /// Evaluate a saved model on a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Train and test each method repeatedly; write JSON and CSV reports.
    Bench(BenchArgs),
    /// Generate a synthetic Gaussian-cluster dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Libsvm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Serial,
    Threaded,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Accuracy,
    F1,
}

impl From<MetricArg> for SelectionMetric {
    fn from(arg: MetricArg) -> Self {
        match arg {
            MetricArg::Accuracy => SelectionMetric::Accuracy,
            MetricArg::F1 => SelectionMetric::F1Macro,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Tree,
    Ovo,
    Ovr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Hypercube,
    Simplex,
}

#[derive(Args)]
pub struct DataArgs {
    /// Input dataset path.
    #[arg(long)]
    pub data: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    pub format: DataFormat,
    /// Label column of a CSV file: an index, a header name, or "last".
    #[arg(long, default_value = "last")]
    pub label_col: String,
    /// CSV field delimiter.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Treat the first CSV row as a header.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args)]
pub struct ExecArgs {
    /// Shard count for map tasks (default: available cores, capped at 16).
    #[arg(long)]
    pub shards: Option<usize>,
    /// Execution backend for map tasks.
    #[arg(long, value_enum, default_value_t = BackendArg::Threaded)]
    pub backend: BackendArg,
    /// Worker threads for the threaded backend (default: available cores).
    #[arg(long, env = "HALFSPLIT_THREADS")]
    pub threads: Option<usize>,
}

impl ExecArgs {
    pub fn shard_config(&self) -> ShardConfig {
        let defaults = ShardConfig::default();
        let threads = self.threads.unwrap_or(match defaults.backend {
            Backend::Threaded { threads } => threads,
            Backend::Serial => 1,
        });
        ShardConfig {
            shards: self.shards.unwrap_or(defaults.shards).max(1),
            backend: match self.backend {
                BackendArg::Serial => Backend::Serial,
                BackendArg::Threaded => Backend::Threaded {
                    threads: threads.max(1),
                },
            },
        }
    }
}

#[derive(Args)]
pub struct TrainOptions {
    /// Regularization weight; larger weakens the ridge term.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Per-class fraction held out for split selection (tree only).
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
    /// Seed for the validation split and candidate sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split-selection metric (tree only).
    #[arg(long, value_enum, default_value_t = MetricArg::Accuracy)]
    pub metric: MetricArg,
    /// Cap on candidate bipartitions per node; exceeding nodes evaluate a
    /// seeded sample and the model is flagged non-exhaustive (tree only).
    #[arg(long)]
    pub max_candidates: Option<usize>,
    /// Standardize features to zero mean and unit variance before
    /// training; the transform is stored in the model file.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Which model to train.
    #[arg(long, value_enum, default_value_t = ModelKind::Tree)]
    kind: ModelKind,
    #[command(flatten)]
    options: TrainOptions,
    #[command(flatten)]
    exec: ExecArgs,
    /// Output model path (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model path (JSON).
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Methods to benchmark.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModelKind::Tree, ModelKind::Ovo, ModelKind::Ovr])]
    methods: Vec<ModelKind>,
    /// Timing repetitions per method; the report carries median/min/max.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Per-class fraction held out as the test set when --test-data is
    /// not given.
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    /// Separate test dataset (same format flags as --data).
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[command(flatten)]
    options: TrainOptions,
    #[command(flatten)]
    exec: ExecArgs,
    /// Output report path (JSON); a plot-ready CSV lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of classes.
    #[arg(long)]
    classes: usize,
    /// Number of features.
    #[arg(long)]
    features: usize,
    /// Total rows, split evenly unless --counts or --proportions is given.
    #[arg(long)]
    rows: Option<usize>,
    /// Explicit per-class row counts (overrides --rows).
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    /// Per-class proportions of --rows (e.g. 0.9,0.05,0.05).
    #[arg(long, value_delimiter = ',')]
    proportions: Option<Vec<f64>>,
    /// Class-center layout.
    #[arg(long, value_enum, default_value_t = SchemeArg::Hypercube)]
    scheme: SchemeArg,
    /// Center coordinate scale (hypercube corner radius / simplex scale).
    #[arg(long, default_value_t = 5.0)]
    center_scale: f64,
    /// Gaussian noise sigma around each center.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) => 2,
        Error::Parse { .. } | Error::Io(_) | Error::ModelFormat(_) => 3,
        Error::DimensionMismatch(_)
        | Error::InvalidInput(_)
        | Error::DegenerateInput(_)
        | Error::UndefinedMetric(_) => 4,
        Error::Numerical(_) => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => {
            commands::train(&args.data, args.kind, &args.options, &args.exec, &args.out)
        }
        Command::Evaluate(args) => commands::evaluate(&args.model, &args.data),
        Command::Bench(args) => commands::bench(
            &args.data,
            &args.methods,
            args.reps,
            args.test_fraction,
            args.test_data.as_deref(),
            &args.options,
            &args.exec,
            &args.out,
        ),
        Command::Generate(args) => commands::generate(
            args.classes,
            args.features,
            args.rows,
            args.counts.as_deref(),
            args.proportions.as_deref(),
            args.scheme,
            args.center_scale,
            args.noise,
            args.seed,
            &args.out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
