//! The Tree Index: a cluster-quality score read off a decision tree trained
//! to predict cluster IDs.
//!
//! For a tree with leaves `1..l`, leaf entropies `E_i` (bits) and leaf depths
//! `d_i`, over `|c|` clusters:
//!
//! ```text
//! M = (sum_i E_i * k_i) / |c|,   k_i = d_i if d_i > 0, k_i = inf if d_i = 0
//! ```
//!
//! A depth-0 leaf is necessarily the whole tree, meaning the labels gave the
//! learner nothing to split on; such a tree scores `inf` whatever its entropy.
//! Lower is better.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{label_with_clustering, min_leaf_size, ClusterAssignment, Dataset, DatasetError};
use crate::decision_tree::{build_tree, DecisionTree, LeafSummary, TreeError};

/// A non-negative real or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedScore {
    Finite(f64),
    Infinite,
}

impl ExtendedScore {
    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedScore::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedScore::Finite(v) => Some(v),
            ExtendedScore::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite case.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn from_f64(v: f64) -> Self {
        if v.is_infinite() {
            ExtendedScore::Infinite
        } else {
            ExtendedScore::Finite(v)
        }
    }
}

impl PartialOrd for ExtendedScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtendedScore::Infinite, ExtendedScore::Infinite) => Some(Ordering::Equal),
            (ExtendedScore::Infinite, _) => Some(Ordering::Greater),
            (_, ExtendedScore::Infinite) => Some(Ordering::Less),
            (ExtendedScore::Finite(a), ExtendedScore::Finite(b)) => a.partial_cmp(b),
        }
    }
}

/// `inf`, or the value with six decimals.
impl fmt::Display for ExtendedScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedScore::Infinite => f.write_str("inf"),
            ExtendedScore::Finite(v) => write!(f, "{v:.6}"),
        }
    }
}

impl Serialize for ExtendedScore {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedScore::Infinite => s.serialize_str("inf"),
            ExtendedScore::Finite(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedScore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtendedScore::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(ExtendedScore::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TreeIndexError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("cannot average an empty list of scores")]
    EmptyRuns,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeIndexReport {
    pub score: ExtendedScore,
    pub per_leaf: Vec<LeafSummary>,
    pub num_clusters: usize,
    pub num_leaves: usize,
    pub min_leaf_used: usize,
}

/// Combines leaf entropies and depths into the index.
pub fn score_from_leaves(leaves: &[LeafSummary], num_clusters: usize) -> ExtendedScore {
    if leaves.iter().any(|l| l.depth == 0) {
        return ExtendedScore::Infinite;
    }
    let weighted: f64 = leaves.iter().map(|l| l.entropy * l.depth as f64).sum();
    ExtendedScore::Finite(weighted / num_clusters as f64)
}

/// Scores an already built tree.
pub fn tree_index_of_tree(tree: &DecisionTree, num_clusters: usize) -> Result<TreeIndexReport, TreeError> {
    if tree.num_classes() != num_clusters || num_clusters == 0 {
        return Err(TreeError::ClassCountMismatch {
            tree: tree.num_classes(),
            requested: num_clusters,
        });
    }
    let per_leaf = tree.leaves();
    let score = if tree.is_root_leaf() {
        ExtendedScore::Infinite
    } else {
        score_from_leaves(&per_leaf, num_clusters)
    };
    Ok(TreeIndexReport {
        score,
        num_leaves: per_leaf.len(),
        per_leaf,
        num_clusters,
        min_leaf_used: tree.min_leaf(),
    })
}

/// Labels `ds` with `ca`, grows a tree with the size-based leaf minimum and
/// scores it.
pub fn evaluate_clustering(ds: &Dataset, ca: &ClusterAssignment) -> Result<TreeIndexReport, TreeIndexError> {
    evaluate_clustering_with(ds, ca, None)
}

/// As [`evaluate_clustering`], optionally forcing the leaf minimum.
pub fn evaluate_clustering_with(
    ds: &Dataset,
    ca: &ClusterAssignment,
    min_leaf_override: Option<usize>,
) -> Result<TreeIndexReport, TreeIndexError> {
    let (report, _) = evaluate_with_tree(ds, ca, min_leaf_override)?;
    Ok(report)
}

/// Returns the induced tree alongside its report.
pub fn evaluate_with_tree(
    ds: &Dataset,
    ca: &ClusterAssignment,
    min_leaf_override: Option<usize>,
) -> Result<(TreeIndexReport, DecisionTree), TreeIndexError> {
    let lds = label_with_clustering(ds, ca)?;
    let min_leaf = min_leaf_override.unwrap_or_else(|| min_leaf_size(ds.n()));
    let tree = build_tree(&lds, min_leaf);
    let report = tree_index_of_tree(&tree, ca.declared_k())?;
    Ok((report, tree))
}

/// Arithmetic mean; a single infinite run makes the mean infinite.
pub fn average_runs(scores: &[ExtendedScore]) -> Result<ExtendedScore, TreeIndexError> {
    if scores.is_empty() {
        return Err(TreeIndexError::EmptyRuns);
    }
    let mut sum = 0.0;
    for s in scores {
        match s {
            ExtendedScore::Infinite => return Ok(ExtendedScore::Infinite),
            ExtendedScore::Finite(v) => sum += v,
        }
    }
    Ok(ExtendedScore::Finite(sum / scores.len() as f64))
}

impl TreeIndexReport {
    /// Recomputes the score from the stored leaves.
    pub fn recompute(&self) -> ExtendedScore {
        score_from_leaves(&self.per_leaf, self.num_clusters)
    }

    /// `tree_index=<score> leaves=<l> clusters=<k> min_leaf=<m>`
    pub fn summary_line(&self) -> String {
        format!(
            "tree_index={} leaves={} clusters={} min_leaf={}",
            self.score, self.num_leaves, self.num_clusters, self.min_leaf_used
        )
    }

    /// Tab-separated leaf table with a header row.
    pub fn leaf_table(&self) -> String {
        let mut out = String::from("leaf\tentropy\tdepth\tsupport\n");
        for (i, l) in self.per_leaf.iter().enumerate() {
            out.push_str(&format!("{i}\t{:.6}\t{}\t{}\n", l.entropy, l.depth, l.support));
        }
        out
    }
}
