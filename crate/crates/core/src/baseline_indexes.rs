//! Conventional cluster-validity indexes, for comparison with the Tree Index.
//!
//! External indexes compare clusters with known classes:
//!
//! * `f_measure`: `sum_class (n_class / n) * max_cluster F1(cluster, class)`,
//!   the class-weighted best-match F1. Higher is better.
//! * `purity`: `(1/n) sum_cluster max_class n(cluster, class)`. Higher is better.
//! * `entropy_ext`: `sum_cluster (n_cluster / n) * H(classes in cluster)` in
//!   bits. Lower is better.
//!
//! Internal indexes use only the data, with Euclidean distance:
//!
//! * `silhouette`: mean of `(b - a) / max(a, b)` over records. A record alone
//!   in its cluster contributes 0, as does a record with `a = b = 0`.
//! * `db`: Davies-Bouldin, `(1/k) sum_i max_{j != i} (S_i + S_j) / M_ij` with
//!   `S_i` the mean member-to-centroid distance and `M_ij` the centroid
//!   distance. Coincident centroids give `+inf`.
//! * `xb`: crisp Xie-Beni, `SSE / (n * min_{i != j} |c_i - c_j|^2)`.
//!   Coincident centroids give `+inf`.
//! * `sse`: sum of squared distances to the cluster centroid.

use std::collections::BTreeMap;

use crate::dataset::{ClusterAssignment, Dataset};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("index `{0}` needs true classes but the dataset has none")]
    MissingTrueClasses(&'static str),
    #[error("index `{index}` needs at least 2 clusters, got {k}")]
    TooFewClusters { index: &'static str, k: usize },
    #[error("assignment has {found} labels, dataset has {expected} records")]
    LengthMismatch { found: usize, expected: usize },
    #[error("unknown index `{0}`")]
    UnknownIndex(String),
}

/// Whether larger or smaller values mean a better clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Higher,
    Lower,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Higher => "higher",
            Direction::Lower => "lower",
        }
    }
}

/// The baseline indexes by stable name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineIndex {
    FMeasure,
    Purity,
    EntropyExt,
    Silhouette,
    Db,
    Xb,
    Sse,
}

impl BaselineIndex {
    pub const ALL: [BaselineIndex; 7] = [
        BaselineIndex::FMeasure,
        BaselineIndex::Purity,
        BaselineIndex::EntropyExt,
        BaselineIndex::Silhouette,
        BaselineIndex::Db,
        BaselineIndex::Xb,
        BaselineIndex::Sse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineIndex::FMeasure => "f_measure",
            BaselineIndex::Purity => "purity",
            BaselineIndex::EntropyExt => "entropy_ext",
            BaselineIndex::Silhouette => "silhouette",
            BaselineIndex::Db => "db",
            BaselineIndex::Xb => "xb",
            BaselineIndex::Sse => "sse",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, IndexError> {
        Self::ALL
            .into_iter()
            .find(|i| i.name() == name)
            .ok_or_else(|| IndexError::UnknownIndex(name.to_string()))
    }

    pub fn direction(self) -> Direction {
        match self {
            BaselineIndex::FMeasure | BaselineIndex::Purity | BaselineIndex::Silhouette => Direction::Higher,
            _ => Direction::Lower,
        }
    }

    pub fn is_external(self) -> bool {
        matches!(
            self,
            BaselineIndex::FMeasure | BaselineIndex::Purity | BaselineIndex::EntropyExt
        )
    }

    /// Evaluates this index on a clustering of `ds`.
    pub fn evaluate(self, ds: &Dataset, ca: &ClusterAssignment) -> Result<f64, IndexError> {
        check_len(ds, ca)?;
        if self.is_external() {
            let ct = ContingencyTable::from_dataset(ds, ca)
                .ok_or(IndexError::MissingTrueClasses(self.name()))?;
            return Ok(match self {
                BaselineIndex::FMeasure => f_measure(&ct),
                BaselineIndex::Purity => purity(&ct),
                _ => external_entropy(&ct),
            });
        }
        match self {
            BaselineIndex::Silhouette => silhouette(ds, ca),
            BaselineIndex::Db => db_index(ds, ca),
            BaselineIndex::Xb => xb_index(ds, ca),
            _ => sse(ds, ca),
        }
    }
}

fn check_len(ds: &Dataset, ca: &ClusterAssignment) -> Result<(), IndexError> {
    if ds.n() != ca.len() {
        return Err(IndexError::LengthMismatch {
            found: ca.len(),
            expected: ds.n(),
        });
    }
    Ok(())
}

/// Record counts by (cluster, true class).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[cluster][class]`
    counts: Vec<Vec<usize>>,
    cluster_totals: Vec<usize>,
    class_totals: Vec<usize>,
    n: usize,
}

impl ContingencyTable {
    /// Builds the table from cluster labels and class indices in `0..classes`.
    pub fn new(clusters: &ClusterAssignment, classes: &[usize], num_classes: usize) -> Self {
        assert_eq!(clusters.len(), classes.len(), "label length mismatch");
        let k = clusters.declared_k();
        let mut counts = vec![vec![0usize; num_classes]; k];
        for (&c, &t) in clusters.labels().iter().zip(classes) {
            counts[c][t] += 1;
        }
        let cluster_totals = counts.iter().map(|row| row.iter().sum()).collect();
        let class_totals = (0..num_classes).map(|t| counts.iter().map(|row| row[t]).sum()).collect();
        Self {
            counts,
            cluster_totals,
            class_totals,
            n: clusters.len(),
        }
    }

    /// Uses the dataset's true classes; `None` when it has none.
    pub fn from_dataset(ds: &Dataset, ca: &ClusterAssignment) -> Option<Self> {
        let names = ds.true_classes()?;
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        for name in names {
            let next = ids.len();
            ids.entry(name.as_str()).or_insert(next);
        }
        let classes: Vec<usize> = names.iter().map(|s| ids[s.as_str()]).collect();
        Some(Self::new(ca, &classes, ids.len()))
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn cluster_totals(&self) -> &[usize] {
        &self.cluster_totals
    }

    pub fn class_totals(&self) -> &[usize] {
        &self.class_totals
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

pub fn f_measure(ct: &ContingencyTable) -> f64 {
    let n = ct.n as f64;
    let mut total = 0.0;
    for (t, &class_size) in ct.class_totals.iter().enumerate() {
        if class_size == 0 {
            continue;
        }
        let best = ct
            .counts
            .iter()
            .zip(&ct.cluster_totals)
            .map(|(row, &cluster_size)| {
                let hits = row[t] as f64;
                if hits == 0.0 {
                    0.0
                } else {
                    2.0 * hits / (cluster_size as f64 + class_size as f64)
                }
            })
            .fold(0.0, f64::max);
        total += class_size as f64 / n * best;
    }
    total
}

pub fn purity(ct: &ContingencyTable) -> f64 {
    let hits: usize = ct.counts.iter().map(|row| row.iter().copied().max().unwrap_or(0)).sum();
    hits as f64 / ct.n as f64
}

pub fn external_entropy(ct: &ContingencyTable) -> f64 {
    let n = ct.n as f64;
    let mut total = 0.0;
    for (row, &size) in ct.counts.iter().zip(&ct.cluster_totals) {
        if size == 0 {
            continue;
        }
        let s = size as f64;
        let h: f64 = row
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / s;
                -p * p.log2()
            })
            .sum();
        total += s / n * h;
    }
    total
}

/// Per-cluster centroids and member counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    centers: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl CentroidModel {
    pub fn fit(ds: &Dataset, ca: &ClusterAssignment) -> Self {
        let k = ca.declared_k();
        let d = ds.d();
        let mut centers = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (record, &c) in ds.records().zip(ca.labels()) {
            counts[c] += 1;
            for (acc, v) in centers[c].iter_mut().zip(record) {
                *acc += v;
            }
        }
        for (center, &count) in centers.iter_mut().zip(&counts) {
            if count > 0 {
                center.iter_mut().for_each(|v| *v /= count as f64);
            }
        }
        Self { centers, counts }
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn sse(ds: &Dataset, ca: &ClusterAssignment) -> Result<f64, IndexError> {
    check_len(ds, ca)?;
    let model = CentroidModel::fit(ds, ca);
    Ok(ds
        .records()
        .zip(ca.labels())
        .map(|(r, &c)| squared_distance(r, &model.centers[c]))
        .sum())
}

pub fn silhouette(ds: &Dataset, ca: &ClusterAssignment) -> Result<f64, IndexError> {
    check_len(ds, ca)?;
    let k = ca.declared_k();
    if k < 2 {
        return Err(IndexError::TooFewClusters { index: "silhouette", k });
    }
    let sizes = ca.sizes();
    let labels = ca.labels();
    let n = ds.n();
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let xi = ds.record(i);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += distance(xi, ds.record(j));
            }
        }
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

pub fn db_index(ds: &Dataset, ca: &ClusterAssignment) -> Result<f64, IndexError> {
    check_len(ds, ca)?;
    let k = ca.declared_k();
    if k < 2 {
        return Err(IndexError::TooFewClusters { index: "db", k });
    }
    let model = CentroidModel::fit(ds, ca);
    let mut scatter = vec![0.0; k];
    for (r, &c) in ds.records().zip(ca.labels()) {
        scatter[c] += distance(r, &model.centers[c]);
    }
    for (s, &count) in scatter.iter_mut().zip(&model.counts) {
        *s /= count as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            let sep = distance(&model.centers[i], &model.centers[j]);
            if sep == 0.0 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn xb_index(ds: &Dataset, ca: &ClusterAssignment) -> Result<f64, IndexError> {
    check_len(ds, ca)?;
    let k = ca.declared_k();
    if k < 2 {
        return Err(IndexError::TooFewClusters { index: "xb", k });
    }
    let model = CentroidModel::fit(ds, ca);
    let mut min_gap = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            min_gap = min_gap.min(squared_distance(&model.centers[i], &model.centers[j]));
        }
    }
    if min_gap == 0.0 {
        return Ok(f64::INFINITY);
    }
    let err = sse(ds, ca)?;
    Ok(err / (ds.n() as f64 * min_gap))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[&[f64]], classes: Option<&[&str]>) -> Dataset {
        let d = rows[0].len();
        Dataset::new(
            "t",
            (0..d).map(|j| format!("a{j}")).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
            classes.map(|c| c.iter().map(|s| s.to_string()).collect()),
        )
        .unwrap()
    }

    fn ca(labels: &[usize]) -> ClusterAssignment {
        ClusterAssignment::from_labels(labels).unwrap()
    }

    fn ct(clusters: &[usize], classes: &[usize]) -> ContingencyTable {
        let k = classes.iter().max().unwrap() + 1;
        ContingencyTable::new(&ca(clusters), classes, k)
    }

    #[test]
    fn f_measure_cases() {
        assert_eq!(f_measure(&ct(&[0, 0, 1, 1], &[0, 0, 1, 1])), 1.0);
        assert!((f_measure(&ct(&[0, 0, 0, 0], &[0, 0, 1, 1])) - 2.0 / 3.0).abs() < 1e-12);
        // A: best F1 = 0.8 (cluster 0); B: best F1 = 2/3 (cluster 1)
        let v = f_measure(&ct(&[0, 0, 0, 1], &[0, 0, 1, 1]));
        assert!((v - (0.5 * 0.8 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn purity_cases() {
        assert_eq!(purity(&ct(&[0, 0, 1, 1], &[0, 0, 1, 1])), 1.0);
        assert_eq!(purity(&ct(&[0, 0, 1, 1], &[0, 1, 0, 1])), 0.5);
        assert_eq!(purity(&ct(&[0, 1, 2, 3], &[0, 0, 1, 1])), 1.0);
    }

    #[test]
    fn external_entropy_cases() {
        assert_eq!(external_entropy(&ct(&[0, 0, 1, 1], &[0, 0, 1, 1])), 0.0);
        assert_eq!(external_entropy(&ct(&[0, 0, 0, 0], &[0, 0, 1, 1])), 1.0);
        assert!((external_entropy(&ct(&[0, 0, 0, 1], &[0, 0, 1, 1])) - 0.688722).abs() < 1e-6);
    }

    #[test]
    fn external_indexes_need_classes() {
        let ds = dataset(&[&[0.0], &[1.0]], None);
        assert_eq!(
            BaselineIndex::Purity.evaluate(&ds, &ca(&[0, 1])),
            Err(IndexError::MissingTrueClasses("purity"))
        );
        let ds = dataset(&[&[0.0], &[1.0]], Some(&["x", "y"]));
        assert_eq!(BaselineIndex::Purity.evaluate(&ds, &ca(&[0, 1])), Ok(1.0));
    }

    #[test]
    fn sse_cases() {
        let ds = dataset(&[&[0.0], &[2.0]], None);
        assert_eq!(sse(&ds, &ca(&[0, 1])).unwrap(), 0.0);
        assert_eq!(sse(&ds, &ca(&[0, 0])).unwrap(), 2.0);
        let ds = dataset(&[&[0.0], &[0.0], &[4.0], &[4.0]], None);
        assert_eq!(sse(&ds, &ca(&[0, 0, 0, 0])).unwrap(), 16.0);
        assert_eq!(sse(&ds, &ca(&[0, 0, 1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn silhouette_cases() {
        let ds = dataset(&[&[0.0], &[1.0], &[100.0], &[101.0]], None);
        let s = silhouette(&ds, &ca(&[0, 0, 1, 1])).unwrap();
        assert!((s - 0.99).abs() < 0.01);

        let spread = 1.0;
        let ds = dataset(&[&[0.0], &[spread], &[100.0 * spread], &[101.0 * spread]], None);
        assert!(silhouette(&ds, &ca(&[0, 0, 1, 1])).unwrap() >= 0.9);

        let same = dataset(&[&[3.0], &[3.0], &[3.0], &[3.0]], None);
        assert_eq!(silhouette(&same, &ca(&[0, 1, 0, 1])).unwrap(), 0.0);

        assert_eq!(
            silhouette(&same, &ca(&[0, 0, 0, 0])),
            Err(IndexError::TooFewClusters { index: "silhouette", k: 1 })
        );
    }

    #[test]
    fn db_cases() {
        let ds = dataset(&[&[0.0], &[1.0]], None);
        assert_eq!(db_index(&ds, &ca(&[0, 1])).unwrap(), 0.0);
        let ds = dataset(&[&[0.0], &[2.0], &[10.0], &[12.0]], None);
        assert!((db_index(&ds, &ca(&[0, 0, 1, 1])).unwrap() - 0.2).abs() < 1e-12);

        let coincident = dataset(&[&[0.0], &[2.0], &[1.0], &[1.0]], None);
        assert_eq!(db_index(&coincident, &ca(&[0, 0, 1, 1])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn db_decreases_as_spread_shrinks() {
        let mut last = f64::INFINITY;
        for spread in [4.0, 2.0, 1.0, 0.5, 0.1] {
            let ds = dataset(&[&[-spread], &[spread], &[20.0 - spread], &[20.0 + spread]], None);
            let v = db_index(&ds, &ca(&[0, 0, 1, 1])).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn xb_cases() {
        let ds = dataset(&[&[0.0], &[1.0]], None);
        assert_eq!(xb_index(&ds, &ca(&[0, 1])).unwrap(), 0.0);
        let ds = dataset(&[&[0.0], &[2.0], &[10.0], &[12.0]], None);
        assert!((xb_index(&ds, &ca(&[0, 0, 1, 1])).unwrap() - 0.01).abs() < 1e-12);
        let scaled = ds.map_values(|_, v| v * 7.5);
        assert!(
            (xb_index(&scaled, &ca(&[0, 0, 1, 1])).unwrap() - 0.01).abs() < 1e-12
        );
    }

    #[test]
    fn names_round_trip() {
        for idx in BaselineIndex::ALL {
            assert_eq!(BaselineIndex::from_name(idx.name()), Ok(idx));
        }
        assert!(BaselineIndex::from_name("cosec").is_err());
        assert_eq!(BaselineIndex::Silhouette.direction().as_str(), "higher");
        assert_eq!(BaselineIndex::Db.direction().as_str(), "lower");
    }
}
