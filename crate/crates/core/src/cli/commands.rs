use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{bench, CliError, ClustererKind, IndexName, KSpec, OutputFormat, RunSpec, DEFAULT_CLASS_COLUMN};
use crate::baseline_indexes::sse;
use crate::clusterers::{degenerate_one_vs_rest, kmeans, random_k, seeded_rng, KMeansConfig, KMeansTrace, Seeding};
use crate::dataset::{
    load_assignment, load_csv, min_max_normalize, write_assignment, write_csv, ClassColumn, ClusterAssignment,
    CsvOptions, Dataset,
};
use crate::eeg_features::Manifest;
use crate::tree_index::{evaluate_with_tree, TreeIndexReport};

/// Where and how to load a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSource {
    pub path: PathBuf,
    pub has_header: bool,
    /// `None` picks a header column named `class` when there is one.
    pub class_column: Option<ClassColumn>,
    pub normalize: bool,
}

impl DatasetSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            has_header: true,
            class_column: None,
            normalize: false,
        }
    }

    pub fn load(&self) -> Result<Dataset, CliError> {
        let class_column = match &self.class_column {
            Some(c) => Some(c.clone()),
            None if self.has_header && header_has(&self.path, DEFAULT_CLASS_COLUMN)? => {
                Some(ClassColumn::Name(DEFAULT_CLASS_COLUMN.to_string()))
            }
            None => None,
        };
        let ds = load_csv(
            &self.path,
            &CsvOptions {
                has_header: self.has_header,
                class_column,
            },
        )?;
        Ok(if self.normalize { min_max_normalize(&ds) } else { ds })
    }
}

fn header_has(path: &Path, column: &str) -> Result<bool, CliError> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    match reader.headers() {
        Ok(h) => Ok(h.iter().any(|c| c == column)),
        Err(_) => Ok(false),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

/// Builds the EEG feature dataset described by `manifest` and writes it.
pub fn cmd_extract(manifest: &Path, out: &Path) -> Result<Dataset, CliError> {
    let ds = Manifest::load(manifest)?.build_dataset()?;
    let mut w = create(out)?;
    write_csv(&ds, &mut w)?;
    w.flush()?;
    Ok(ds)
}

/// A clusterer and its parameters, minus the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClustererSpec {
    pub kind: ClustererKind,
    pub k: KSpec,
    pub isolate: usize,
    pub max_iterations: usize,
    pub movement_threshold: f64,
}

impl ClustererSpec {
    pub fn kmeans(k: KSpec) -> Self {
        Self {
            kind: ClustererKind::Kmeans,
            k,
            isolate: 0,
            max_iterations: KMeansConfig::DEFAULT_MAX_ITERATIONS,
            movement_threshold: KMeansConfig::DEFAULT_MOVEMENT_THRESHOLD,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ClustererKind::Kmeans => "kmeans",
            ClustererKind::KmeansPp => "kmeans++",
            ClustererKind::Degenerate => "degenerate",
        }
    }

    /// Runs the clusterer. The seed drives both the random-k draw and the
    /// k-means seeding.
    pub fn run(&self, ds: &Dataset, seed: u64) -> Result<(ClusterAssignment, usize, Option<KMeansTrace>), CliError> {
        let seeding = match self.kind {
            ClustererKind::Degenerate => {
                let ca = degenerate_one_vs_rest(ds, self.isolate)?;
                return Ok((ca, 2, None));
            }
            ClustererKind::Kmeans => Seeding::UniformRandom,
            ClustererKind::KmeansPp => Seeding::PlusPlus,
        };
        let k = match self.k {
            KSpec::Fixed(k) => k,
            KSpec::Random => random_k(ds.n(), &mut seeded_rng(seed))?,
        };
        let cfg = KMeansConfig {
            k,
            max_iterations: self.max_iterations,
            movement_threshold: self.movement_threshold,
            seeding,
            rng_seed: seed,
        };
        let (ca, trace) = kmeans(ds, &cfg)?;
        Ok((ca, k, Some(trace)))
    }
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub assignment: ClusterAssignment,
    pub requested_k: usize,
    pub sse: f64,
    pub trace: Option<KMeansTrace>,
}

impl ClusterOutcome {
    pub fn summary_line(&self) -> String {
        format!(
            "declared_k={} requested_k={} sse={}",
            self.assignment.declared_k(),
            self.requested_k,
            format_value(self.sse)
        )
    }
}

/// Clusters a dataset and writes the assignment (and optional trace).
pub fn cmd_cluster(
    source: &DatasetSource,
    spec: &ClustererSpec,
    seed: u64,
    out: &Path,
    trace_out: Option<&Path>,
) -> Result<ClusterOutcome, CliError> {
    let ds = source.load()?;
    let (assignment, requested_k, trace) = spec.run(&ds, seed)?;
    let mut w = create(out)?;
    write_assignment(&assignment, &mut w)?;
    w.flush()?;
    if let (Some(path), Some(t)) = (trace_out, &trace) {
        fs::write(path, t.to_csv())?;
    }
    Ok(ClusterOutcome {
        sse: sse(&ds, &assignment)?,
        assignment,
        requested_k,
        trace,
    })
}

/// `inf` for infinities, otherwise six decimals.
pub fn format_value(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

/// One computed index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexValue {
    pub index: IndexName,
    pub value: f64,
}

impl Serialize for IndexValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("IndexValue", 3)?;
        st.serialize_field("index", self.index.name())?;
        st.serialize_field("value", &JsonNumber(self.value))?;
        st.serialize_field("direction", &self.index.direction())?;
        st.end()
    }
}

/// Serializes `+inf` as the string `"inf"`.
pub(crate) struct JsonNumber(pub f64);

impl Serialize for JsonNumber {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&format_value(self.0))
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub tree_report: TreeIndexReport,
    pub tree_dump: String,
    pub values: Vec<IndexValue>,
}

impl EvaluateOutcome {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|v| v.index.name() == name).map(|v| v.value)
    }

    /// `index,value,direction` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,direction\n");
        for v in &self.values {
            out.push_str(&format!(
                "{},{},{}\n",
                v.index.name(),
                format_value(v.value),
                v.index.direction().as_str()
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            tree_index: &'a TreeIndexReport,
            indexes: &'a [IndexValue],
        }
        let mut s = serde_json::to_string_pretty(&Doc {
            tree_index: &self.tree_report,
            indexes: &self.values,
        })
        .expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn print(&self, out: &mut impl Write, leaves: bool, tree: bool) -> std::io::Result<()> {
        writeln!(out, "{}", self.tree_report.summary_line())?;
        out.write_all(self.to_csv().as_bytes())?;
        if leaves {
            out.write_all(self.tree_report.leaf_table().as_bytes())?;
        }
        if tree {
            out.write_all(self.tree_dump.as_bytes())?;
        }
        Ok(())
    }
}

/// Checks a requested index list against what the dataset offers.
pub(crate) fn resolve_indexes(requested: Option<&[IndexName]>, ds: &Dataset) -> Result<Vec<IndexName>, CliError> {
    let has_classes = ds.true_classes().is_some();
    let list = match requested {
        Some(l) if !l.is_empty() => l.to_vec(),
        _ => IndexName::defaults(has_classes),
    };
    if !has_classes {
        if let Some(ext) = list.iter().find(|i| i.is_external()) {
            return Err(crate::baseline_indexes::IndexError::MissingTrueClasses(match ext {
                IndexName::Baseline(b) => b.name(),
                IndexName::TreeIndex => unreachable!(),
            })
            .into());
        }
    }
    Ok(list)
}

/// Computes the listed indexes for one assignment.
pub(crate) fn compute_indexes(
    ds: &Dataset,
    ca: &ClusterAssignment,
    indexes: &[IndexName],
    min_leaf_override: Option<usize>,
) -> Result<(Vec<IndexValue>, TreeIndexReport, String), CliError> {
    let (report, tree) = evaluate_with_tree(ds, ca, min_leaf_override)?;
    let mut values = Vec::with_capacity(indexes.len());
    for &index in indexes {
        let value = match index {
            IndexName::TreeIndex => report.score.to_f64(),
            IndexName::Baseline(b) => b.evaluate(ds, ca)?,
        };
        values.push(IndexValue { index, value });
    }
    Ok((values, report, tree.dump(ds.attributes())))
}

/// Loads a dataset and assignment and scores the assignment.
pub fn cmd_evaluate(
    source: &DatasetSource,
    assignment: &Path,
    indexes: Option<&[IndexName]>,
    min_leaf_override: Option<usize>,
) -> Result<EvaluateOutcome, CliError> {
    let ds = source.load()?;
    let ca = load_assignment(assignment)?;
    let list = resolve_indexes(indexes, &ds)?;
    let (values, tree_report, tree_dump) = compute_indexes(&ds, &ca, &list, min_leaf_override)?;
    Ok(EvaluateOutcome {
        tree_report,
        tree_dump,
        values,
    })
}

/// Runs the repeated clustering/evaluation protocol on a worker pool of
/// `threads` workers (all cores when `None`).
pub fn cmd_bench(spec: &RunSpec, threads: Option<usize>) -> Result<bench::BenchReport, CliError> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(|| bench::run_bench(spec))
        }
        None => bench::run_bench(spec),
    }
}

/// Writes `attr1,attr2,attr3,cluster_id[,true_class]` rows.
pub fn cmd_plot_export(
    source: &DatasetSource,
    assignment: &Path,
    attrs: &[String],
    out: &Path,
) -> Result<usize, CliError> {
    if attrs.len() != 3 {
        return Err(CliError::Usage(format!(
            "--attrs needs exactly 3 attribute names, got {}",
            attrs.len()
        )));
    }
    let ds = source.load()?;
    let columns: Vec<usize> = attrs
        .iter()
        .map(|a| {
            ds.attribute_index(a).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown attribute `{a}` (available: {})",
                    ds.attributes().join(", ")
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    let ca = load_assignment(assignment)?;
    if ca.len() != ds.n() {
        return Err(CliError::Usage(format!(
            "assignment has {} rows, dataset has {}",
            ca.len(),
            ds.n()
        )));
    }
    let mut w = csv::Writer::from_writer(create(out)?);
    let mut header: Vec<&str> = attrs.iter().map(String::as_str).collect();
    header.push("cluster_id");
    if ds.true_classes().is_some() {
        header.push("true_class");
    }
    w.write_record(&header).map_err(|e| CliError::Runtime(e.to_string()))?;
    for i in 0..ds.n() {
        let mut row: Vec<String> = columns.iter().map(|&j| ds.value(i, j).to_string()).collect();
        row.push(ca.labels()[i].to_string());
        if let Some(c) = ds.true_classes() {
            row.push(c[i].clone());
        }
        w.write_record(&row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush()?;
    Ok(ds.n())
}
