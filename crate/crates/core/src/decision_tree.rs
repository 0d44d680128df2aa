//! Unpruned C4.5-style decision trees over continuous attributes.
//!
//! Each internal node tests `attribute <= threshold`, with thresholds at the
//! midpoint between consecutive distinct observed values. Split selection
//! follows C4.5:
//!
//! * a candidate's information gain is reduced by `log2(cuts) / n`, where
//!   `cuts` is the number of admissible cut points on that attribute at the
//!   node and `n` is the node size (the continuous-attribute correction of
//!   C4.5 release 8);
//! * only candidates whose corrected gain is positive and at least the mean
//!   corrected gain of the positive candidates are eligible;
//! * among eligible candidates the highest gain ratio wins, ties going to the
//!   lower attribute index and then the lower threshold.
//!
//! A node becomes a leaf when it is pure, when no cut leaves `min_leaf`
//! records on both sides, or when nothing is eligible. Trees are never pruned,
//! so leaf depth reflects how hard the labels were to separate.

use std::fmt::Write as _;

use crate::dataset::LabeledDataset;

/// Gains at or below this are treated as zero.
pub const GAIN_EPSILON: f64 = 1e-12;

/// Gain ratios closer than this are treated as tied.
pub const RATIO_TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("left and right histograms do not sum to the parent")]
    HistogramMismatch,
    #[error("tree has {tree} classes but {requested} clusters were given")]
    ClassCountMismatch { tree: usize, requested: usize },
    #[error("malformed tree: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        attribute: usize,
        threshold: f64,
        /// Records with `value <= threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: Vec<usize>,
        depth: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LeafSummary {
    /// Shannon entropy of the leaf's class distribution, in bits.
    pub entropy: f64,
    /// Edges from the root.
    pub depth: usize,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    root: TreeNode,
    num_classes: usize,
    min_leaf: usize,
    num_leaves: usize,
}

/// A scored binary cut on one attribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub attribute: usize,
    pub threshold: f64,
    /// Information gain after the cut-point correction.
    pub gain: f64,
    pub gain_ratio: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// Terms are summed in ascending count order so the result does not depend
/// on how classes are numbered.
fn entropy_of(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    let term = |c: usize| {
        let p = c as f64 / n;
        -p * p.log2()
    };
    let mut buf = [0usize; 32];
    let mut heap;
    let nonzero: &mut [usize] = if counts.len() <= buf.len() {
        let mut m = 0;
        for &c in counts.iter().filter(|&&c| c > 0) {
            buf[m] = c;
            m += 1;
        }
        &mut buf[..m]
    } else {
        heap = counts.iter().copied().filter(|&c| c > 0).collect::<Vec<_>>();
        &mut heap
    };
    nonzero.sort_unstable();
    nonzero.iter().map(|&c| term(c)).fold(0.0, |h, t| h + t)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn split_entropy(class_counts: &[usize]) -> Result<f64, TreeError> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(TreeError::EmptyHistogram);
    }
    Ok(entropy_of(class_counts, total))
}

/// `H(parent) - (n_L/n) H(left) - (n_R/n) H(right)`.
pub fn information_gain(parent: &[usize], left: &[usize], right: &[usize]) -> Result<f64, TreeError> {
    if parent.len() != left.len()
        || parent.len() != right.len()
        || parent.iter().zip(left).zip(right).any(|((p, l), r)| l + r != *p)
    {
        return Err(TreeError::HistogramMismatch);
    }
    let n: usize = parent.iter().sum();
    let n_left: usize = left.iter().sum();
    let n_right = n - n_left;
    if n == 0 {
        return Err(TreeError::EmptyHistogram);
    }
    let mut gain = entropy_of(parent, n);
    if n_left > 0 {
        gain -= n_left as f64 / n as f64 * entropy_of(left, n_left);
    }
    if n_right > 0 {
        gain -= n_right as f64 / n as f64 * entropy_of(right, n_right);
    }
    Ok(gain)
}

/// Split information of a two-way cut.
pub fn split_info(left_count: usize, right_count: usize) -> f64 {
    entropy_of(&[left_count, right_count], left_count + right_count)
}

/// `gain / split_info`. Both counts must be at least one.
pub fn gain_ratio(gain: f64, left_count: usize, right_count: usize) -> f64 {
    debug_assert!(left_count >= 1 && right_count >= 1);
    if gain == 0.0 {
        return 0.0;
    }
    gain / split_info(left_count, right_count)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if lo < mid && mid < hi {
        mid
    } else {
        lo
    }
}

/// Every admissible cut at a node, attribute-major with ascending thresholds.
pub fn candidate_splits(lds: &LabeledDataset<'_>, records: &[usize], min_leaf: usize) -> Vec<SplitCandidate> {
    let ds = lds.base();
    let classes = lds.class_of();
    let k = lds.num_classes();
    let n = records.len();
    let min_leaf = min_leaf.max(1);
    let mut parent = vec![0usize; k];
    for &r in records {
        parent[classes[r]] += 1;
    }
    let parent_entropy = entropy_of(&parent, n);

    let mut out = Vec::new();
    let mut order: Vec<usize> = records.to_vec();
    let mut left = vec![0usize; k];
    let mut right = vec![0usize; k];
    let mut raw: Vec<(f64, usize, f64)> = Vec::new();
    for attribute in 0..ds.d() {
        order.sort_by(|&a, &b| ds.value(a, attribute).total_cmp(&ds.value(b, attribute)));
        left.iter_mut().for_each(|c| *c = 0);
        raw.clear();
        for pos in 0..n.saturating_sub(1) {
            left[classes[order[pos]]] += 1;
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let lo = ds.value(order[pos], attribute);
            let hi = ds.value(order[pos + 1], attribute);
            if lo >= hi {
                continue;
            }
            for ((r, p), l) in right.iter_mut().zip(&parent).zip(&left) {
                *r = p - l;
            }
            let gain = parent_entropy
                - n_left as f64 / n as f64 * entropy_of(&left, n_left)
                - n_right as f64 / n as f64 * entropy_of(&right, n_right);
            raw.push((midpoint(lo, hi), n_left, gain));
        }
        if raw.is_empty() {
            continue;
        }
        let penalty = (raw.len() as f64).log2() / n as f64;
        out.extend(raw.iter().map(|&(threshold, n_left, gain)| {
            let gain = gain - penalty;
            SplitCandidate {
                attribute,
                threshold,
                gain,
                gain_ratio: gain / split_info(n_left, n - n_left),
                left_count: n_left,
                right_count: n - n_left,
            }
        }));
    }
    out
}

/// Applies the mean-gain guard and gain-ratio selection to a candidate list
/// given in attribute-major, ascending-threshold order.
pub fn choose_split(candidates: &[SplitCandidate]) -> Option<SplitCandidate> {
    let positive: Vec<&SplitCandidate> = candidates.iter().filter(|c| c.gain > GAIN_EPSILON).collect();
    if positive.is_empty() {
        return None;
    }
    let mean_gain = positive.iter().map(|c| c.gain).sum::<f64>() / positive.len() as f64;
    let eligible: Vec<&SplitCandidate> = positive
        .into_iter()
        .filter(|c| c.gain >= mean_gain - GAIN_EPSILON)
        .collect();
    let best = eligible.iter().map(|c| c.gain_ratio).fold(f64::NEG_INFINITY, f64::max);
    eligible
        .into_iter()
        .find(|c| c.gain_ratio >= best - RATIO_TIE_EPSILON)
        .copied()
}

/// Induces a tree over `lds`. `min_leaf` is the minimum number of records on
/// each side of any cut; it is raised to 1 if given as 0.
pub fn build_tree(lds: &LabeledDataset<'_>, min_leaf: usize) -> DecisionTree {
    let min_leaf = min_leaf.max(1);
    let records: Vec<usize> = (0..lds.base().n()).collect();
    let root = grow(lds, records, 0, min_leaf);
    let num_leaves = count_leaves(&root);
    DecisionTree {
        root,
        num_classes: lds.num_classes(),
        min_leaf,
        num_leaves,
    }
}

fn grow(lds: &LabeledDataset<'_>, records: Vec<usize>, depth: usize, min_leaf: usize) -> TreeNode {
    let classes = lds.class_of();
    let mut counts = vec![0usize; lds.num_classes()];
    for &r in &records {
        counts[classes[r]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || records.len() < 2 * min_leaf {
        return TreeNode::Leaf {
            class_counts: counts,
            depth,
        };
    }
    let Some(split) = choose_split(&candidate_splits(lds, &records, min_leaf)) else {
        return TreeNode::Leaf {
            class_counts: counts,
            depth,
        };
    };
    let ds = lds.base();
    let (left, right): (Vec<usize>, Vec<usize>) = records
        .into_iter()
        .partition(|&r| ds.value(r, split.attribute) <= split.threshold);
    debug_assert_eq!(left.len(), split.left_count);
    TreeNode::Internal {
        attribute: split.attribute,
        threshold: split.threshold,
        left: Box::new(grow(lds, left, depth + 1, min_leaf)),
        right: Box::new(grow(lds, right, depth + 1, min_leaf)),
    }
}

fn count_leaves(node: &TreeNode) -> usize {
    match node {
        TreeNode::Leaf { .. } => 1,
        TreeNode::Internal { left, right, .. } => count_leaves(left) + count_leaves(right),
    }
}

impl DecisionTree {
    /// Wraps a hand-built node structure. Leaves must be non-empty, carry
    /// `num_classes` counts and record their true depth.
    pub fn from_root(root: TreeNode, num_classes: usize, min_leaf: usize) -> Result<Self, TreeError> {
        fn check(node: &TreeNode, depth: usize, k: usize) -> Result<usize, TreeError> {
            match node {
                TreeNode::Leaf { class_counts, depth: d } => {
                    if class_counts.len() != k {
                        return Err(TreeError::Malformed(format!(
                            "leaf has {} counts, expected {k}",
                            class_counts.len()
                        )));
                    }
                    if class_counts.iter().sum::<usize>() == 0 {
                        return Err(TreeError::Malformed("empty leaf".into()));
                    }
                    if *d != depth {
                        return Err(TreeError::Malformed(format!("leaf at depth {depth} claims depth {d}")));
                    }
                    Ok(1)
                }
                TreeNode::Internal { left, right, .. } => Ok(check(left, depth + 1, k)? + check(right, depth + 1, k)?),
            }
        }
        let num_leaves = check(&root, 0, num_classes)?;
        Ok(Self {
            root,
            num_classes,
            min_leaf: min_leaf.max(1),
            num_leaves,
        })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn min_leaf(&self) -> usize {
        self.min_leaf
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn is_root_leaf(&self) -> bool {
        matches!(self.root, TreeNode::Leaf { .. })
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> usize {
        self.leaves().iter().map(|l| l.depth).max().unwrap_or(0)
    }

    /// Leaf class histograms in left-to-right order.
    pub fn leaf_histograms(&self) -> Vec<&[usize]> {
        let mut out = Vec::with_capacity(self.num_leaves);
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { class_counts, .. } => out.push(class_counts.as_slice()),
                TreeNode::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// One summary per leaf, left to right.
    pub fn leaves(&self) -> Vec<LeafSummary> {
        let mut out = Vec::with_capacity(self.num_leaves);
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { class_counts, depth } => {
                    let support: usize = class_counts.iter().sum();
                    out.push(LeafSummary {
                        entropy: entropy_of(class_counts, support),
                        depth: *depth,
                        support,
                    });
                }
                TreeNode::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// True when both trees test the same attributes in the same places and
    /// end in identical leaves. Thresholds are ignored.
    pub fn same_shape(&self, other: &DecisionTree) -> bool {
        fn walk(a: &TreeNode, b: &TreeNode) -> bool {
            match (a, b) {
                (
                    TreeNode::Leaf { class_counts: ca, depth: da },
                    TreeNode::Leaf { class_counts: cb, depth: db },
                ) => ca == cb && da == db,
                (
                    TreeNode::Internal { attribute: aa, left: la, right: ra, .. },
                    TreeNode::Internal { attribute: ab, left: lb, right: rb, .. },
                ) => aa == ab && walk(la, lb) && walk(ra, rb),
                _ => false,
            }
        }
        self.num_classes == other.num_classes && walk(&self.root, &other.root)
    }

    /// Indented text rendering, one line per test outcome and per leaf.
    pub fn dump(&self, attribute_names: &[String]) -> String {
        fn name(names: &[String], i: usize) -> String {
            names.get(i).cloned().unwrap_or_else(|| format!("attr_{i}"))
        }
        fn walk(node: &TreeNode, names: &[String], indent: usize, out: &mut String) {
            let pad = "  ".repeat(indent);
            match node {
                TreeNode::Leaf { class_counts, depth } => {
                    let _ = writeln!(out, "{pad}class counts {class_counts:?} depth={depth}");
                }
                TreeNode::Internal {
                    attribute,
                    threshold,
                    left,
                    right,
                } => {
                    let a = name(names, *attribute);
                    let _ = writeln!(out, "{pad}{a} <= {threshold}");
                    walk(left, names, indent + 1, out);
                    let _ = writeln!(out, "{pad}{a} > {threshold}");
                    walk(right, names, indent + 1, out);
                }
            }
        }
        let mut out = String::new();
        walk(&self.root, attribute_names, 0, &mut out);
        out
    }
}
