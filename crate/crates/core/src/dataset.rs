//! Record tables, cluster assignments and the CSV formats that carry them.
//!
//! A [`Dataset`] is an immutable `n × d` table of finite reals with named
//! attributes and an optional per-record true class. A [`ClusterAssignment`]
//! maps every record to a dense cluster ID in `0..k`. Joining the two yields a
//! [`LabeledDataset`], the input to tree induction.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

/// Errors raised while building, loading or combining datasets.
#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty input: no data rows")]
    Empty,
    #[error("dataset needs at least one attribute")]
    NoAttributes,
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("row {row}, column `{column}`: cannot parse `{cell}` as a finite real")]
    BadCell {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("class column `{0}` not found")]
    UnknownClassColumn(String),
    #[error("true class column has {found} entries, dataset has {expected} records")]
    ClassLengthMismatch { found: usize, expected: usize },
    #[error("assignment has {found} labels, dataset has {expected} records")]
    LengthMismatch { found: usize, expected: usize },
    #[error("assignment must contain at least one record")]
    EmptyAssignment,
    #[error("assignment file: {0}")]
    BadAssignment(String),
}

/// An immutable table of `n` records over `d` named numeric attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    attributes: Vec<String>,
    values: Vec<f64>,
    true_classes: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row vectors, checking every table invariant.
    pub fn new(
        name: impl Into<String>,
        attributes: Vec<String>,
        rows: Vec<Vec<f64>>,
        true_classes: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        let d = attributes.len();
        if d == 0 {
            return Err(DatasetError::NoAttributes);
        }
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut seen = HashSet::with_capacity(d);
        for a in &attributes {
            if !seen.insert(a.as_str()) {
                return Err(DatasetError::DuplicateAttribute(a.clone()));
            }
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        for (row, record) in rows.iter().enumerate() {
            if record.len() != d {
                return Err(DatasetError::RaggedRow {
                    row,
                    found: record.len(),
                    expected: d,
                });
            }
            for (j, &v) in record.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DatasetError::BadCell {
                        row,
                        column: attributes[j].clone(),
                        cell: v.to_string(),
                    });
                }
            }
            values.extend_from_slice(record);
        }
        if let Some(classes) = &true_classes {
            if classes.len() != rows.len() {
                return Err(DatasetError::ClassLengthMismatch {
                    found: classes.len(),
                    expected: rows.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            attributes,
            values,
            true_classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    /// Number of records.
    pub fn n(&self) -> usize {
        self.values.len() / self.attributes.len()
    }

    /// Number of attributes.
    pub fn d(&self) -> usize {
        self.attributes.len()
    }

    pub fn record(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d())
    }

    pub fn value(&self, record: usize, attribute: usize) -> f64 {
        self.values[record * self.d() + attribute]
    }

    pub fn true_classes(&self) -> Option<&[String]> {
        self.true_classes.as_deref()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }

    /// Returns a copy with every value replaced by `f(attribute, value)`.
    ///
    /// Panics if `f` produces a non-finite value.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let d = self.d();
        let values: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let out = f(idx % d, v);
                assert!(out.is_finite(), "map_values produced a non-finite value");
                out
            })
            .collect();
        Self {
            name: self.name.clone(),
            attributes: self.attributes.clone(),
            values,
            true_classes: self.true_classes.clone(),
        }
    }

    /// Returns a copy with the records reordered so that output record `i` is
    /// input record `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n(), "permutation length");
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.record(i));
        }
        Self {
            name: self.name.clone(),
            attributes: self.attributes.clone(),
            values,
            true_classes: self
                .true_classes
                .as_ref()
                .map(|c| order.iter().map(|&i| c[i].clone()).collect()),
        }
    }
}

/// Selects the class column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ClassColumn {
    type Err = std::convert::Infallible;

    /// A bare non-negative integer selects by position, anything else by name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ClassColumn::Index(i),
            Err(_) => ClassColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    pub class_column: Option<ClassColumn>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            class_column: None,
        }
    }
}

/// Loads a numeric CSV file. Row order is preserved; the dataset takes the
/// file stem as its name.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, name, options)
}

/// Reads a dataset from any CSV source.
pub fn read_csv(
    source: impl Read,
    name: impl Into<String>,
    options: &CsvOptions,
) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let header: Option<Vec<String>> = if options.has_header {
        let h = reader.headers()?;
        if h.is_empty() || (h.len() == 1 && h[0].is_empty()) {
            return Err(DatasetError::Empty);
        }
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut raw: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        raw.push(rec);
    }
    if raw.is_empty() {
        return Err(DatasetError::Empty);
    }

    let width = header.as_ref().map_or(raw[0].len(), Vec::len);
    let columns: Vec<String> =
        header.unwrap_or_else(|| (0..width).map(|j| format!("attr_{j}")).collect());

    let class_idx = match &options.class_column {
        None => None,
        Some(ClassColumn::Index(i)) if *i < width => Some(*i),
        Some(ClassColumn::Index(i)) => return Err(DatasetError::UnknownClassColumn(i.to_string())),
        Some(ClassColumn::Name(n)) => Some(
            columns
                .iter()
                .position(|c| c == n)
                .ok_or_else(|| DatasetError::UnknownClassColumn(n.clone()))?,
        ),
    };

    let attributes: Vec<String> = columns
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != class_idx)
        .map(|(_, c)| c.clone())
        .collect();

    let mut rows = Vec::with_capacity(raw.len());
    let mut classes = class_idx.map(|_| Vec::with_capacity(raw.len()));
    for (row, rec) in raw.iter().enumerate() {
        if rec.len() != width {
            return Err(DatasetError::RaggedRow {
                row,
                found: rec.len(),
                expected: width,
            });
        }
        let mut values = Vec::with_capacity(attributes.len());
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == class_idx {
                if let Some(c) = classes.as_mut() {
                    c.push(cell.to_string());
                }
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(DatasetError::BadCell {
                        row,
                        column: columns[j].clone(),
                        cell: cell.to_string(),
                    })
                }
            }
        }
        rows.push(values);
    }
    Dataset::new(name, attributes, rows, classes)
}

/// Writes the dataset as CSV with a header row; true classes, when present,
/// go in a trailing `class` column.
pub fn write_csv(ds: &Dataset, sink: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = ds.attributes.iter().map(String::as_str).collect();
    if ds.true_classes.is_some() {
        header.push("class");
    }
    w.write_record(&header)?;
    let mut cells: Vec<String> = Vec::with_capacity(header.len());
    for (i, record) in ds.records().enumerate() {
        cells.clear();
        cells.extend(record.iter().map(|v| v.to_string()));
        if let Some(c) = &ds.true_classes {
            cells.push(c[i].clone());
        }
        w.write_record(&cells)?;
    }
    w.flush().map_err(|e| DatasetError::Csv(e.into()))?;
    Ok(())
}

/// Per-record cluster IDs, densified to `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    declared_k: usize,
}

impl ClusterAssignment {
    /// Canonicalizes arbitrary non-negative IDs to dense `0..k`, preserving
    /// the relative order of the raw ID values (so labels already dense are
    /// kept unchanged).
    pub fn from_labels(raw: &[usize]) -> Result<Self, DatasetError> {
        if raw.is_empty() {
            return Err(DatasetError::EmptyAssignment);
        }
        let distinct: BTreeSet<usize> = raw.iter().copied().collect();
        let rank: HashMap<usize, usize> = distinct.iter().enumerate().map(|(r, &id)| (id, r)).collect();
        Ok(Self {
            labels: raw.iter().map(|id| rank[id]).collect(),
            declared_k: distinct.len(),
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of distinct clusters present.
    pub fn declared_k(&self) -> usize {
        self.declared_k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member count per cluster.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.declared_k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Writes `record_index,cluster_id` rows with a header.
pub fn write_assignment(ca: &ClusterAssignment, sink: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["record_index", "cluster_id"])?;
    for (i, l) in ca.labels.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| DatasetError::Csv(e.into()))?;
    Ok(())
}

/// Reads a `record_index,cluster_id` file. Rows may come in any order but
/// must cover `0..n` exactly once. A header row is detected and skipped.
pub fn read_assignment(source: impl Read) -> Result<ClusterAssignment, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(DatasetError::BadAssignment(format!(
                "line {}: expected 2 fields, found {}",
                line + 1,
                rec.len()
            )));
        }
        match (rec[0].parse::<usize>(), rec[1].parse::<usize>()) {
            (Ok(i), Ok(c)) => pairs.push((i, c)),
            _ if line == 0 => continue,
            _ => {
                return Err(DatasetError::BadAssignment(format!(
                    "line {}: `{},{}` is not an index pair",
                    line + 1,
                    &rec[0],
                    &rec[1]
                )))
            }
        }
    }
    if pairs.is_empty() {
        return Err(DatasetError::EmptyAssignment);
    }
    let n = pairs.len();
    let mut labels = vec![usize::MAX; n];
    for (i, c) in pairs {
        if i >= n {
            return Err(DatasetError::BadAssignment(format!(
                "record index {i} out of range for {n} rows"
            )));
        }
        if labels[i] != usize::MAX {
            return Err(DatasetError::BadAssignment(format!("record index {i} repeated")));
        }
        labels[i] = c;
    }
    ClusterAssignment::from_labels(&labels)
}

pub fn load_assignment(path: impl AsRef<Path>) -> Result<ClusterAssignment, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_assignment(file)
}

/// A dataset whose class label is the cluster ID of each record.
#[derive(Debug, Clone)]
pub struct LabeledDataset<'a> {
    base: &'a Dataset,
    class_of: Vec<usize>,
    num_classes: usize,
}

impl<'a> LabeledDataset<'a> {
    pub fn base(&self) -> &'a Dataset {
        self.base
    }

    pub fn class_of(&self) -> &[usize] {
        &self.class_of
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// Uses the cluster IDs of `ca` as class values over `ds`.
pub fn label_with_clustering<'a>(
    ds: &'a Dataset,
    ca: &ClusterAssignment,
) -> Result<LabeledDataset<'a>, DatasetError> {
    if ca.len() != ds.n() {
        return Err(DatasetError::LengthMismatch {
            found: ca.len(),
            expected: ds.n(),
        });
    }
    Ok(LabeledDataset {
        base: ds,
        class_of: ca.labels.clone(),
        num_classes: ca.declared_k,
    })
}

/// Maps each attribute affinely onto `[0, 1]`; constant attributes become 0.
pub fn min_max_normalize(ds: &Dataset) -> Dataset {
    let d = ds.d();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in ds.records() {
        for (j, &v) in r.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    ds.map_values(|j, v| {
        let range = hi[j] - lo[j];
        if range > 0.0 {
            ((v - lo[j]) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Minimum records per tree leaf: 1% of `n`, floored, clamped to `[2, 15]`.
pub fn min_leaf_size(n: usize) -> usize {
    (n / 100).clamp(2, 15)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset {
        let d = rows[0].len();
        Dataset::new("t", (0..d).map(|j| format!("a{j}")).collect(), rows, None).unwrap()
    }

    #[test]
    fn loads_plain_numeric_file() {
        let text = "x,y\n1,2\n3,4\n5,6\n";
        let ds = read_csv(text.as_bytes(), "t", &CsvOptions::default()).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.record(2), &[5.0, 6.0]);
        assert!(ds.true_classes().is_none());
    }

    #[test]
    fn class_column_by_name_is_excluded_from_attributes() {
        let text = "mcv,alkphos,selector\n85,92,1\n90,60,2\n";
        let opts = CsvOptions {
            has_header: true,
            class_column: Some(ClassColumn::Name("selector".into())),
        };
        let ds = read_csv(text.as_bytes(), "ld", &opts).unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.attributes(), &["mcv".to_string(), "alkphos".to_string()]);
        assert_eq!(ds.true_classes().unwrap(), &["1".to_string(), "2".to_string()]);
    }

    #[test]
    fn class_column_by_index_without_header() {
        let text = "a,1,2\nb,3,4\n";
        let opts = CsvOptions {
            has_header: false,
            class_column: Some(ClassColumn::Index(0)),
        };
        let ds = read_csv(text.as_bytes(), "t", &opts).unwrap();
        assert_eq!(ds.attributes(), &["attr_1".to_string(), "attr_2".to_string()]);
        assert_eq!(ds.true_classes().unwrap()[1], "b");
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let text = "x,y\n1,2\n3,abc\n";
        let err = read_csv(text.as_bytes(), "t", &CsvOptions::default()).unwrap_err();
        match err {
            DatasetError::BadCell { row, column, cell } => {
                assert_eq!((row, column.as_str(), cell.as_str()), (1, "y", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_cells_are_rejected() {
        let text = "x\n1\ninf\n";
        assert!(matches!(
            read_csv(text.as_bytes(), "t", &CsvOptions::default()),
            Err(DatasetError::BadCell { .. })
        ));
    }

    #[test]
    fn empty_and_duplicate_header_errors() {
        assert!(matches!(
            read_csv("".as_bytes(), "t", &CsvOptions::default()),
            Err(DatasetError::Empty)
        ));
        assert!(matches!(
            read_csv("x,y\n".as_bytes(), "t", &CsvOptions::default()),
            Err(DatasetError::Empty)
        ));
        assert!(matches!(
            read_csv("x,x\n1,2\n".as_bytes(), "t", &CsvOptions::default()),
            Err(DatasetError::DuplicateAttribute(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/data.csv", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::Io { .. }));
    }

    #[test]
    fn normalization_cases() {
        let n = min_max_normalize(&ds(vec![vec![2.0, 5.0], vec![4.0, 5.0], vec![6.0, 5.0]]));
        let col0: Vec<f64> = n.records().map(|r| r[0]).collect();
        let col1: Vec<f64> = n.records().map(|r| r[1]).collect();
        assert_eq!(col0, vec![0.0, 0.5, 1.0]);
        assert_eq!(col1, vec![0.0, 0.0, 0.0]);

        let unit = ds(vec![vec![0.0], vec![0.25], vec![1.0]]);
        assert_eq!(min_max_normalize(&unit), unit);
    }

    #[test]
    fn labeling_cases() {
        let base = ds(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let before = base.clone();
        let two = ClusterAssignment::from_labels(&[0, 0, 1, 1]).unwrap();
        assert_eq!(label_with_clustering(&base, &two).unwrap().num_classes(), 2);
        let one = ClusterAssignment::from_labels(&[0, 0, 0, 0]).unwrap();
        assert_eq!(label_with_clustering(&base, &one).unwrap().num_classes(), 1);
        let short = ClusterAssignment::from_labels(&[0, 0, 1]).unwrap();
        assert!(matches!(
            label_with_clustering(&base, &short),
            Err(DatasetError::LengthMismatch { found: 3, expected: 4 })
        ));
        assert_eq!(base, before);
    }

    #[test]
    fn assignment_canonicalization_keeps_dense_ids() {
        let a = ClusterAssignment::from_labels(&[1, 0, 0, 0, 0]).unwrap();
        assert_eq!(a.labels(), &[1, 0, 0, 0, 0]);
        let b = ClusterAssignment::from_labels(&[7, 7, 3, 9]).unwrap();
        assert_eq!(b.labels(), &[1, 1, 0, 2]);
        assert_eq!(b.declared_k(), 3);
        assert!(ClusterAssignment::from_labels(&[]).is_err());
    }

    #[test]
    fn assignment_file_round_trip_and_errors() {
        let a = ClusterAssignment::from_labels(&[0, 2, 1, 1]).unwrap();
        let mut buf = Vec::new();
        write_assignment(&a, &mut buf).unwrap();
        assert_eq!(read_assignment(buf.as_slice()).unwrap(), a);

        let shuffled = "record_index,cluster_id\n1,1\n0,0\n";
        assert_eq!(read_assignment(shuffled.as_bytes()).unwrap().labels(), &[0, 1]);
        assert!(read_assignment("0,0\n0,1\n".as_bytes()).is_err());
        assert!(read_assignment("0,0\n5,1\n".as_bytes()).is_err());
    }

    #[test]
    fn min_leaf_size_cases() {
        assert_eq!(min_leaf_size(8280), 15);
        assert_eq!(min_leaf_size(100), 2);
        assert_eq!(min_leaf_size(1000), 10);
        assert_eq!(min_leaf_size(1), 2);
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20),
                          with_class in any::<bool>()) {
            let classes = with_class.then(|| (0..rows.len()).map(|i| format!("c{}", i % 3)).collect());
            let ds = Dataset::new("rt", vec!["a".into(), "b".into(), "c".into()], rows, classes).unwrap();
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf).unwrap();
            let opts = CsvOptions {
                has_header: true,
                class_column: with_class.then(|| ClassColumn::Name("class".into())),
            };
            let back = read_csv(buf.as_slice(), "rt", &opts).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn normalize_is_idempotent(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2), 1..30)) {
            let once = min_max_normalize(&ds(rows));
            let twice = min_max_normalize(&once);
            for (a, b) in once.records().zip(twice.records()) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn min_leaf_size_is_monotone_and_bounded(n in 1usize..100_000) {
            let m = min_leaf_size(n);
            prop_assert!((2..=15).contains(&m));
            prop_assert!(min_leaf_size(n + 1) >= m);
        }
    }
}
