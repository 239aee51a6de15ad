use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "aida",
    version,
    about = "Distance-profile anomaly detection and tempered feature explanations",
    args_override_self = true
)]
pub struct Cli {
    /// File of `key=value` lines (one flag per line, `#` starts a comment).
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 = all cores, 1 = deterministic serial order).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic dataset.
    Gen(GenArgs),
    /// Fit a model and write it as JSON.
    Fit(FitArgs),
    /// Score every row of a dataset.
    Score(ScoreArgs),
    /// Rank the features that make one row anomalous.
    Explain(ExplainArgs),
    /// Summarize distance profiles over growing feature prefixes.
    Dpp(DppArgs),
    /// Run the benchmark protocols.
    Bench(BenchArgs),
    /// Tabulate the probability that random tree paths cover a hidden subspace.
    Isoprob(IsoprobArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Cross,
    HiddenSubspace,
    TwoClusters,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Feature count (ignored by two-clusters, which is 2-D).
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Output CSV; ground truth goes to `<out>.truth.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Where to find the data and which columns are special.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Label column (name or zero-based index). Defaults to a column named
    /// `label` if present.
    #[arg(long)]
    pub label: Option<String>,
    /// Comma-separated nominal columns (names or zero-based indices).
    #[arg(long, value_delimiter = ',')]
    pub nominal: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreKind {
    Variance,
    Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationKind {
    Average,
    Max,
    Aom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaggingKind {
    Auto,
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Ensemble size.
    #[arg(long = "N", default_value_t = 100)]
    pub n_subsamples: usize,
    #[arg(long, default_value_t = 50)]
    pub psi_min: usize,
    #[arg(long, default_value_t = 512)]
    pub psi_max: usize,
    #[arg(long, value_enum, default_value_t = BaggingKind::Auto)]
    pub bagging: BaggingKind,
    /// Exponent of the Lp distance.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Comma-separated feature weights, numeric features first.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ScoreKind::Variance)]
    pub score: ScoreKind,
    /// Fixed gap exponent.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Lower end of a per-member uniform gap exponent (needs --alpha-max).
    #[arg(long, requires = "alpha_max")]
    pub alpha_min: Option<f64>,
    #[arg(long, requires = "alpha_min")]
    pub alpha_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = AggregationKind::Aom)]
    pub aggregation: AggregationKind,
    /// Members per AOM bucket.
    #[arg(long, default_value_t = 5)]
    pub q: usize,
    /// Z-score numeric features with training statistics.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Store per-member score statistics of the training data so that later
    /// batches (even single rows) can be scored on the same scale.
    #[arg(long)]
    pub calibrate: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Normalize with the stored calibration instead of the batch itself.
    #[arg(long)]
    pub calibrated: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OffsetKind {
    Additive,
    Rank,
}

#[derive(Debug, Args)]
pub struct TixArgs {
    /// Repetitions per ensemble member.
    #[arg(long = "M", default_value_t = 10)]
    pub repetitions: usize,
    /// Iteration cap per run (default 50 times the feature count).
    #[arg(long = "L")]
    pub max_iterations: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 0.015)]
    pub delta_max: f64,
    /// Fixed temperature; overrides the delta range.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Never accept a removal that lowers the score.
    #[arg(long)]
    pub greedy: bool,
    /// Refine on shrinking feature sets.
    #[arg(long)]
    pub refine: bool,
    /// Shrink factor between refinement passes.
    #[arg(long, default_value_t = 1.5)]
    pub beta: f64,
    /// Refinement stops at this many features.
    #[arg(long, default_value_t = 10)]
    pub kmin: usize,
    #[arg(long, value_enum, default_value_t = OffsetKind::Additive)]
    pub offset: OffsetKind,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Zero-based row to explain.
    #[arg(long)]
    pub row: usize,
    #[command(flatten)]
    pub tix: TixArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DppArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub row: usize,
    /// Comma-separated feature order (names or indices). Without it the
    /// features are ordered by an explanation of the row.
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<String>,
    /// Largest prefix size (default: all features in the order).
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Ensemble member whose subsample is the reference set.
    #[arg(long, default_value_t = 0)]
    pub member: usize,
    #[command(flatten)]
    pub tix: TixArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    Sa,
    Greedy,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Minimal explanation subspace on the Cross dataset.
    #[arg(long)]
    pub cross: bool,
    /// Single pass against budget-matched refinement on the Cross dataset.
    #[arg(long)]
    pub refinement: bool,
    /// Scoring time against n and d.
    #[arg(long)]
    pub runtime: bool,
    /// Dimensions for --cross and --refinement.
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 20, 30, 50])]
    pub d: Vec<usize>,
    #[arg(long, value_enum, default_value_t = BenchMode::Both)]
    pub mode: BenchMode,
    #[arg(long, default_value_t = 10)]
    pub executions: usize,
    /// Rows of each Cross dataset.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub tix: TixArgs,
    /// Row counts of the runtime sweep (at d = --sweep-d).
    #[arg(long, value_delimiter = ',', default_values_t = [1000, 2000, 4000])]
    pub sweep_n: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub sweep_d: usize,
    /// Dimensions of the runtime sweep (at n = --sweep-fixed-n).
    #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 200])]
    pub sweep_dims: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub sweep_fixed_n: usize,
    /// Timing repeats; the fastest counts.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Output CSV (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IsoprobArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub r: Vec<usize>,
    /// Maximum tree depths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub h: Vec<usize>,
    /// Output CSV (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
