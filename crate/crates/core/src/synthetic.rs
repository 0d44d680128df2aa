//! Seeded synthetic data for demos and tests.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::clusterers::seeded_rng;
use crate::dataset::{ClusterAssignment, Dataset};

/// Two isotropic Gaussian blobs in `dims` dimensions, unit standard
/// deviation, with centers `separation` apart along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBlobs {
    pub n: usize,
    pub dims: usize,
    /// Center distance in units of the blob standard deviation.
    pub separation: f64,
    /// Distance past the second center, along the first axis, of an extra
    /// far outlier that belongs to the second blob. `None` for no outlier.
    pub outlier_offset: Option<f64>,
}

/// A generated dataset with its ground-truth blob labels.
#[derive(Debug, Clone)]
pub struct Blobs {
    pub dataset: Dataset,
    pub truth: ClusterAssignment,
    /// Index of the outlier record, when one was generated.
    pub outlier: Option<usize>,
}

impl TwoBlobs {
    pub fn new(n: usize, separation: f64) -> Self {
        Self {
            n,
            dims: 2,
            separation,
            outlier_offset: None,
        }
    }

    pub fn with_outlier(mut self, offset: f64) -> Self {
        self.outlier_offset = Some(offset);
        self
    }

    /// Blob 0 takes the first half of the records, blob 1 the rest; with an
    /// outlier, it is the last record and `n` includes it.
    pub fn generate(&self, seed: u64) -> Blobs {
        assert!(self.n >= 3 && self.dims >= 1);
        let mut rng = seeded_rng(seed);
        let body = if self.outlier_offset.is_some() { self.n - 1 } else { self.n };
        let first = body / 2;
        let mut rows = Vec::with_capacity(self.n);
        let mut labels = Vec::with_capacity(self.n);
        for i in 0..body {
            let blob = usize::from(i >= first);
            let mut row: Vec<f64> = (0..self.dims).map(|_| StandardNormal.sample(&mut rng)).collect();
            row[0] += blob as f64 * self.separation;
            rows.push(row);
            labels.push(blob);
        }
        let outlier = self.outlier_offset.map(|offset| {
            let mut row = vec![0.0; self.dims];
            row[0] = self.separation + offset;
            rows.push(row);
            labels.push(1);
            rows.len() - 1
        });
        let classes = labels.iter().map(|&l| format!("blob{l}")).collect();
        let attributes = (0..self.dims).map(|j| format!("x{j}")).collect();
        Blobs {
            dataset: Dataset::new(format!("two_blobs_{seed}"), attributes, rows, Some(classes))
                .expect("generated data is finite"),
            truth: ClusterAssignment::from_labels(&labels).expect("non-empty"),
            outlier,
        }
    }
}

/// Labels drawn uniformly from `0..k`, redrawn until every label appears.
pub fn uniform_random_labels(n: usize, k: usize, seed: u64) -> ClusterAssignment {
    assert!(k >= 1 && n >= k);
    let mut rng = seeded_rng(seed);
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let ca = ClusterAssignment::from_labels(&labels).expect("non-empty");
        if ca.declared_k() == k {
            return ca;
        }
    }
}

/// A Gaussian sample stream, quantized to integers to mimic 16-bit ADC output.
pub fn quantized_noise(len: usize, std_dev: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    let dist = Normal::new(0.0, std_dev).expect("finite std_dev");
    (0..len).map(|_| dist.sample(&mut rng).round()).collect()
}
