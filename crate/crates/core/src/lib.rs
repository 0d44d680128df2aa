//! Cluster validation with the Tree Index.
//!
//! A clustering is scored by training a decision tree to predict its cluster
//! IDs and combining each leaf's entropy with its depth: clusterings that a
//! short tree with pure leaves can reproduce score low (good), while
//! clusterings that give the tree nothing to split on score infinity.
//!
//! Alongside the index the crate provides the conventional validity indexes
//! it is compared with, reference k-means clusterers, EEG epoch feature
//! extraction, and the `treeidx` command-line tool.

pub mod baseline_indexes;
pub mod cli;
pub mod clusterers;
pub mod dataset;
pub mod decision_tree;
pub mod eeg_features;
pub mod synthetic;
pub mod tree_index;

pub use dataset::{ClusterAssignment, Dataset, LabeledDataset};
pub use decision_tree::{build_tree, DecisionTree, LeafSummary};
pub use tree_index::{evaluate_clustering, ExtendedScore, TreeIndexReport};
