//! The `gbafs` command-line tool.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gbafs::dataio::{load_csv, minmax_normalize, LabelColumn};
use gbafs::tsne::TsneConfig;
use gbafs::{Dataset, PipelineConfig};

mod commands;
pub mod compare;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gbafs", version, about = "Graph-based automatic feature selection")]
#[command(after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.")]
pub struct Cli {
    /// Directory that receives reports, CSV files and plots.
    #[arg(long, global = true, env = "GBAFS_OUT_DIR", default_value = "gbafs-out")]
    pub out_dir: PathBuf,

    /// Worker threads; defaults to one per core. Results do not depend on it.
    #[arg(long, global = true, env = "GBAFS_THREADS")]
    pub threads: Option<usize>,

    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select features: MSS curve over k, knee, medoid features.
    Select(SelectArgs),
    /// Compare GB-AFS against the filter baselines at the same k over repeated splits.
    Compare(CompareArgs),
    /// Run one baseline filter method at a given k.
    Baseline(BaselineArgs),
    /// KNN accuracy, balanced F and prediction time of a feature subset.
    Evaluate(EvaluateArgs),
    /// Build the feature space and its t-SNE embedding only.
    EmbedOnly(EmbedArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Label column, by header name or zero-based index.
    #[arg(long, default_value = "label")]
    pub label: String,

    /// Skip min-max scaling of the features.
    #[arg(long)]
    pub no_normalize: bool,

    /// Base seed for splits, t-SNE and clustering.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    pub fn label_column(&self) -> LabelColumn {
        LabelColumn::parse(&self.label)
    }

    pub fn load(&self) -> anyhow::Result<Dataset> {
        let d = load_csv(&self.input, &self.label_column())?;
        Ok(if self.no_normalize { d } else { minmax_normalize(&d) })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TsneArgs {
    /// t-SNE perplexity; lowered automatically for small feature counts.
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,

    /// t-SNE gradient steps.
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
}

impl TsneArgs {
    fn config(&self, seed: u64) -> TsneConfig {
        TsneConfig { perplexity: self.perplexity, iterations: self.iterations, seed, ..Default::default() }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub tsne: TsneArgs,

    /// Cross-validation folds for the MSS curve.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    /// Largest k on the MSS curve (default: number of features).
    #[arg(long)]
    pub k_max: Option<usize>,

    /// Kneedle sensitivity.
    #[arg(long, default_value_t = 1.0)]
    pub knee_sensitivity: f64,

    /// Moving-average window applied to the curve before knee detection.
    #[arg(long, default_value_t = 0)]
    pub knee_smoothing: usize,

    /// k-medoids restarts per k; the lowest-cost run is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
}

impl PipelineArgs {
    pub fn config(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            tsne: self.tsne.config(seed),
            fold_count: self.folds,
            k_max: self.k_max,
            knee_sensitivity: self.knee_sensitivity,
            knee_smoothing: self.knee_smoothing,
            restarts: self.restarts,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Select on a seeded training split of this fraction instead of the whole file.
    #[arg(long)]
    pub train_fraction: Option<f64>,

    /// Also write SVG plots of the curves and the embedding.
    #[arg(long)]
    pub plots: bool,

    /// Also write the feature space (one row per feature, one column per class pair).
    #[arg(long)]
    pub export_z: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gbafs,
    Relieff,
    Fisher,
    Cfs,
    Random,
    All,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Gbafs => "gbafs",
            Method::Relieff => "relieff",
            Method::Fisher => "fisher",
            Method::Cfs => "cfs",
            Method::Random => "random",
            Method::All => "all",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Take k from an existing selection report instead of selecting inline.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Seeded train/test repetitions.
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,

    /// Fraction of rows used for training in each repetition.
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,

    /// KNN neighbors.
    #[arg(long, default_value_t = 5)]
    pub neighbors: usize,

    /// ReliefF neighbors (lowered when a class is too small).
    #[arg(long, default_value_t = 10)]
    pub relief_neighbors: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum)]
    pub method: BaselineMethod,

    /// Number of features to keep.
    #[arg(long)]
    pub k: usize,

    /// ReliefF neighbors.
    #[arg(long, default_value_t = 10)]
    pub relief_neighbors: usize,

    /// Score on a seeded training split of this fraction instead of the whole file.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Relieff,
    Fisher,
    Cfs,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Comma-separated feature names or zero-based indices.
    #[arg(long, conflicts_with = "report", required_unless_present = "report")]
    pub features: Option<String>,

    /// Evaluate the features of a selection report.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// KNN neighbors.
    #[arg(long, default_value_t = 5)]
    pub neighbors: usize,

    /// Fraction of rows used for training.
    #[arg(long, default_value_t = 0.75)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub tsne: TsneArgs,

    /// Also write an SVG scatter of the embedding.
    #[arg(long)]
    pub plots: bool,

    /// Also write the feature space.
    #[arg(long)]
    pub export_z: bool,
}

/// A bad combination of otherwise well-formed arguments.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<gbafs::Error>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
