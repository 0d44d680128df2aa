//! Command-line front end: `extract`, `cluster`, `evaluate`, `bench` and
//! `plot-export`.
//!
//! Exit codes: 0 on success, 1 on runtime failures (I/O, malformed input),
//! 2 on usage or contract violations.

pub mod bench;
pub mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baseline_indexes::{BaselineIndex, Direction, IndexError};
use crate::clusterers::ClusterError;
use crate::dataset::{ClassColumn, DatasetError};
use crate::eeg_features::EegError;
use crate::tree_index::TreeIndexError;

pub use bench::{BenchReport, BenchRun, RunSpec};
pub use commands::{
    cmd_bench, cmd_cluster, cmd_evaluate, cmd_extract, cmd_plot_export, ClusterOutcome, ClustererSpec,
    DatasetSource, EvaluateOutcome, IndexValue,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::UnknownClassColumn(_) | DatasetError::LengthMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EegError> for CliError {
    fn from(e: EegError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::MissingTrueClasses(index) => CliError::Usage(format!(
                "index `{index}` needs true classes, but the dataset has no class column \
                 (expected a column named `{DEFAULT_CLASS_COLUMN}`; select one with --class-column)"
            )),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TreeIndexError> for CliError {
    fn from(e: TreeIndexError) -> Self {
        match e {
            TreeIndexError::Dataset(d) => d.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Header name used for the true-class column when none is given.
pub const DEFAULT_CLASS_COLUMN: &str = "class";

/// Any index the CLI can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexName {
    TreeIndex,
    Baseline(BaselineIndex),
}

impl IndexName {
    pub fn name(self) -> &'static str {
        match self {
            IndexName::TreeIndex => "tree_index",
            IndexName::Baseline(b) => b.name(),
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            IndexName::TreeIndex => Direction::Lower,
            IndexName::Baseline(b) => b.direction(),
        }
    }

    pub fn is_external(self) -> bool {
        matches!(self, IndexName::Baseline(b) if b.is_external())
    }

    /// `tree_index` followed by the baselines; external ones only when
    /// classes are available.
    pub fn defaults(with_classes: bool) -> Vec<IndexName> {
        std::iter::once(IndexName::TreeIndex)
            .chain(
                BaselineIndex::ALL
                    .into_iter()
                    .filter(|b| with_classes || !b.is_external())
                    .map(IndexName::Baseline),
            )
            .collect()
    }
}

impl FromStr for IndexName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "tree_index" {
            return Ok(IndexName::TreeIndex);
        }
        BaselineIndex::from_name(s)
            .map(IndexName::Baseline)
            .map_err(|_| {
                format!("unknown index `{s}` (expected tree_index, f_measure, purity, entropy_ext, silhouette, db, xb or sse)")
            })
    }
}

/// `<int>` or `random`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSpec {
    Fixed(usize),
    Random,
}

impl FromStr for KSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "random" {
            return Ok(KSpec::Random);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KSpec::Fixed(k)),
            _ => Err(format!("`{s}` is neither a positive integer nor `random`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClustererKind {
    /// Lloyd's k-means with uniform seeding
    Kmeans,
    /// Lloyd's k-means with k-means++ seeding
    #[value(name = "kmeans++", alias = "kmeanspp")]
    KmeansPp,
    /// One record alone in its own cluster
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "treeidx", version, about = "Tree Index cluster evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn per-channel EEG sample files into the 9-feature epoch dataset
    Extract {
        /// JSON manifest listing channels, sample rate and seizure intervals
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a dataset and write `record_index,cluster_id` rows
    Cluster {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        clusterer: ClustererArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-iteration k-means trace here
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score an assignment with the Tree Index and baseline indexes
    Evaluate {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        assignment: PathBuf,
        /// Comma-separated index names; defaults to every applicable index
        #[arg(long, value_delimiter = ',')]
        indexes: Option<Vec<IndexName>>,
        #[arg(long)]
        min_leaf_override: Option<usize>,
        /// Print the per-leaf entropy/depth table
        #[arg(long)]
        leaves: bool,
        /// Print the induced decision tree
        #[arg(long)]
        tree: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Repeat clustering and evaluation with seeds seed..seed+reps-1
    Bench {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        clusterer: ClustererArgs,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, value_delimiter = ',')]
        indexes: Option<Vec<IndexName>>,
        #[arg(long)]
        min_leaf_override: Option<usize>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// Recompute the average row from the per-run rows and fail on mismatch
        #[arg(long)]
        audit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Write three attributes plus cluster IDs for external plotting
    PlotExport {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        assignment: PathBuf,
        /// Exactly three attribute names, comma-separated
        #[arg(long, value_delimiter = ',', required = true)]
        attrs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Class column by header name or 0-based index (default: `class` if present)
    #[arg(long)]
    pub class_column: Option<String>,
    /// The file has no header row
    #[arg(long)]
    pub no_header: bool,
    /// Min-max normalize every attribute to [0, 1] after loading
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ClustererArgs {
    #[arg(long, value_enum, default_value = "kmeans")]
    pub clusterer: ClustererKind,
    /// Cluster count, or `random` for a uniform draw from [2, floor(sqrt(n))]
    #[arg(long, default_value = "2")]
    pub k: KSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record isolated by the degenerate clusterer
    #[arg(long, default_value_t = 0)]
    pub isolate: usize,
    #[arg(long, default_value_t = crate::clusterers::KMeansConfig::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
    #[arg(long, default_value_t = crate::clusterers::KMeansConfig::DEFAULT_MOVEMENT_THRESHOLD)]
    pub threshold: f64,
}

impl DatasetArgs {
    pub fn source(&self) -> DatasetSource {
        DatasetSource {
            path: self.dataset.clone(),
            has_header: !self.no_header,
            class_column: self.class_column.as_deref().map(|c| ClassColumn::from_str(c).expect("infallible")),
            normalize: self.normalize,
        }
    }
}

impl ClustererArgs {
    pub fn spec(&self) -> ClustererSpec {
        ClustererSpec {
            kind: self.clusterer,
            k: self.k,
            isolate: self.isolate,
            max_iterations: self.max_iter,
            movement_threshold: self.threshold,
        }
    }
}

/// Runs a parsed command line, printing to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Extract { manifest, out } => {
            let ds = cmd_extract(&manifest, &out)?;
            let seizures = ds
                .true_classes()
                .map_or(0, |c| c.iter().filter(|l| *l == crate::eeg_features::SEIZURE).count());
            writeln!(stdout, "records={} attributes={} seizure={}", ds.n(), ds.d(), seizures)?;
        }
        Command::Cluster {
            data,
            clusterer,
            out,
            trace,
        } => {
            let outcome = cmd_cluster(&data.source(), &clusterer.spec(), clusterer.seed, &out, trace.as_deref())?;
            writeln!(stdout, "{}", outcome.summary_line())?;
        }
        Command::Evaluate {
            data,
            assignment,
            indexes,
            min_leaf_override,
            leaves,
            tree,
            out,
            format,
        } => {
            let outcome = cmd_evaluate(&data.source(), &assignment, indexes.as_deref(), min_leaf_override)?;
            outcome.print(&mut stdout, leaves, tree)?;
            if let Some(path) = out {
                std::fs::write(&path, outcome.render(format))?;
            }
        }
        Command::Bench {
            data,
            clusterer,
            reps,
            indexes,
            min_leaf_override,
            threads,
            audit,
            out,
            format,
        } => {
            let spec = RunSpec {
                dataset: data.source(),
                clusterer: clusterer.spec(),
                seed: clusterer.seed,
                repetitions: reps,
                indexes,
                min_leaf_override,
            };
            let report = cmd_bench(&spec, threads)?;
            if audit {
                report.audit().map_err(CliError::Runtime)?;
                bench::audit_csv(&report.to_csv()).map_err(CliError::Runtime)?;
            }
            let rendered = match format {
                OutputFormat::Csv => report.to_csv(),
                OutputFormat::Json => report.to_json(),
            };
            match out {
                Some(path) => {
                    std::fs::write(&path, &rendered)?;
                    writeln!(stdout, "{}", report.average_line())?;
                }
                None => stdout.write_all(rendered.as_bytes())?,
            }
        }
        Command::PlotExport {
            data,
            assignment,
            attrs,
            out,
        } => {
            let rows = cmd_plot_export(&data.source(), &assignment, &attrs, &out)?;
            writeln!(stdout, "rows={rows}")?;
        }
    }
    Ok(())
}
