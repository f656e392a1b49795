use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gbtsvm::evaluation::Normalization;
use gbtsvm::{DeOverlap, Method, RadiusMode};

#[derive(Debug, Parser)]
#[command(
    name = "gbtsvm",
    version,
    about = "Granular-ball twin support vector machines"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for ball generation, fold plans and label noise.
    #[arg(long, global = true, env = "GBTSVM_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "GBTSVM_THREADS")]
    pub threads: Option<usize>,

    /// Directory for reports and the run manifest.
    #[arg(long, global = true, env = "GBTSVM_OUT", default_value = ".")]
    pub out: PathBuf,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to disk.
    Train(TrainArgs),
    /// Classify rows with a saved model.
    Predict(PredictArgs),
    /// Generate granular balls and write them as CSV.
    Balls(BallArgs),
    /// Cross-validated grid search, optionally under label noise.
    Benchmark(BenchmarkArgs),
    /// Friedman test and Nemenyi critical difference on an accuracy table.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV or sparse file, or `bundled:<name>`.
    #[arg(long, env = "GBTSVM_DATA")]
    pub data: String,

    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,

    /// Label column: `last`, a 0-based index or a header name.
    #[arg(long, default_value = "last")]
    pub label_column: String,

    /// Raw label value mapped to +1.
    #[arg(long)]
    pub positive_label: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BallGenArgs {
    /// Purity threshold T0 in (0.5, 1].
    #[arg(long, env = "GBTSVM_T0", default_value_t = 1.0)]
    pub t0: f64,

    #[arg(long, value_enum, env = "GBTSVM_RADIUS", default_value_t = RadiusArg::Max)]
    pub radius: RadiusArg,

    #[arg(long, value_enum, default_value_t = DeOverlapArg::Strict)]
    pub de_overlap: DeOverlapArg,

    #[arg(long, default_value_t = 2)]
    pub min_split: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Ridge added to the Gram matrix before factorization.
    #[arg(long, default_value_t = gbtsvm::classifiers::DEFAULT_REG_EPS)]
    pub reg_eps: f64,

    #[arg(long, default_value_t = gbtsvm::box_qp::DEFAULT_TOL)]
    pub qp_tol: f64,

    /// Iteration cap per dual (default: 10 m + 1000).
    #[arg(long)]
    pub qp_max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_parser = parse_method)]
    pub method: Method,

    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,

    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,

    /// Fuzzy penalty for the first plane (default: c1).
    #[arg(long)]
    pub c3: Option<f64>,

    /// Fuzzy penalty for the second plane (default: c2).
    #[arg(long)]
    pub c4: Option<f64>,

    #[command(flatten)]
    pub balls: BallGenArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Train on raw features instead of min-max scaled ones.
    #[arg(long)]
    pub no_normalize: bool,

    /// Small constant in the membership denominator.
    #[arg(long, default_value_t = gbtsvm::pythagorean::DEFAULT_EPSILON)]
    pub epsilon: f64,

    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// Rows to classify, with or without a trailing label column.
    #[arg(long)]
    pub data: String,

    /// Raw label value mapped to +1 when the input is labeled.
    #[arg(long)]
    pub positive_label: Option<String>,

    /// Write one label per line here instead of standard output.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BallArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub balls: BallGenArgs,

    /// Append membership, non-membership, closeness and score columns.
    #[arg(long)]
    pub scores: bool,

    #[arg(long, default_value_t = gbtsvm::pythagorean::DEFAULT_EPSILON)]
    pub epsilon: f64,

    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Datasets to evaluate; repeat the flag or separate with commas.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub data: Vec<String>,

    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "twsvm,gbtwsvm,gbftsvm")]
    pub methods: Vec<Method>,

    /// Exponent grid for C1 and C2, `a..b` or a comma list.
    #[arg(
        long,
        env = "GBTSVM_GRID",
        default_value = "-5..5",
        allow_hyphen_values = true
    )]
    pub grid: String,

    /// Label-noise rates; rate 0 is the clean grid-search row.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub noise: Vec<f64>,

    /// Noise seeds used for each non-zero rate.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub noise_seeds: Vec<u64>,

    /// Flip test labels as well as training labels.
    #[arg(long)]
    pub noise_all: bool,

    #[arg(long, env = "GBTSVM_FOLDS", default_value_t = 10)]
    pub folds: usize,

    /// Balance each class across folds.
    #[arg(long)]
    pub stratified: bool,

    #[arg(long, value_enum, default_value_t = NormalizeArg::Global)]
    pub normalize: NormalizeArg,

    #[arg(long, default_value_t = gbtsvm::pythagorean::DEFAULT_EPSILON)]
    pub epsilon: f64,

    #[command(flatten)]
    pub balls: BallGenArgs,

    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CSV `dataset,model1,model2,...`, or `bundled:reference`.
    #[arg(long)]
    pub acc_matrix: String,

    /// Nemenyi critical value (default: alpha = 0.05 table for up to 10 models).
    #[arg(long, env = "GBTSVM_Q_ALPHA")]
    pub q_alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RadiusArg {
    Max,
    Mean,
}

impl From<RadiusArg> for RadiusMode {
    fn from(r: RadiusArg) -> Self {
        match r {
            RadiusArg::Max => RadiusMode::Max,
            RadiusArg::Mean => RadiusMode::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeOverlapArg {
    Strict,
    Containment,
    Off,
}

impl From<DeOverlapArg> for DeOverlap {
    fn from(d: DeOverlapArg) -> Self {
        match d {
            DeOverlapArg::Strict => DeOverlap::Strict,
            DeOverlapArg::Containment => DeOverlap::Containment,
            DeOverlapArg::Off => DeOverlap::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    /// Whole dataset before splitting.
    Global,
    /// Fit on each training split.
    Train,
    Off,
}

impl From<NormalizeArg> for Normalization {
    fn from(n: NormalizeArg) -> Self {
        match n {
            NormalizeArg::Global => Normalization::Global,
            NormalizeArg::Train => Normalization::TrainSplit,
            NormalizeArg::Off => Normalization::Off,
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}
