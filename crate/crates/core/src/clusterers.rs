//! Reference clusterers: Lloyd's k-means with uniform or k-means++ seeding,
//! the random cluster-count rule, and a one-vs-rest degenerate fixture.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline_indexes::squared_distance;
use crate::dataset::{ClusterAssignment, Dataset};

/// The generator used for every seeded run.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("k = {k} exceeds the {n} records available")]
    TooManyClusters { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("random k needs at least 4 records, got {0}")]
    TooFewRecords(usize),
    #[error("record index {index} out of range for {n} records")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid k-means configuration: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seeding {
    /// `k` distinct records chosen uniformly.
    UniformRandom,
    PlusPlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once no center moves farther than this (Euclidean).
    pub movement_threshold: f64,
    pub seeding: Seeding,
    pub rng_seed: u64,
}

impl KMeansConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 50;
    pub const DEFAULT_MOVEMENT_THRESHOLD: f64 = 0.005;

    pub fn new(k: usize, seeding: Seeding, rng_seed: u64) -> Self {
        Self {
            k,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            movement_threshold: Self::DEFAULT_MOVEMENT_THRESHOLD,
            seeding,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<(), ClusterError> {
        if self.k == 0 {
            return Err(ClusterError::ZeroClusters);
        }
        if self.max_iterations == 0 {
            return Err(ClusterError::BadConfig("max_iterations must be at least 1"));
        }
        if !(self.movement_threshold >= 0.0) {
            return Err(ClusterError::BadConfig("movement_threshold must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansTrace {
    /// SSE after each iteration's center update.
    pub sse: Vec<f64>,
    /// Largest center displacement in each iteration.
    pub max_shift: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl KMeansTrace {
    /// `iteration,sse,max_shift` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,sse,max_shift\n");
        for (i, (s, m)) in self.sse.iter().zip(&self.max_shift).enumerate() {
            out.push_str(&format!("{},{s},{m}\n", i + 1));
        }
        out
    }
}

/// Uniform cluster count in `[2, floor(sqrt(n))]`.
pub fn random_k(n: usize, rng: &mut impl Rng) -> Result<usize, ClusterError> {
    if n < 4 {
        return Err(ClusterError::TooFewRecords(n));
    }
    Ok(rng.random_range(2..=n.isqrt()))
}

/// k-means++ seeding: the first center is a uniform record, each further one
/// is drawn with probability proportional to its squared distance to the
/// nearest chosen center. When every remaining distance is zero the next
/// center is a uniform choice among records not yet chosen.
pub fn kmeans_pp_seed(ds: &Dataset, k: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>, ClusterError> {
    let n = ds.n();
    if k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![ds.record(first).to_vec()];
    let mut nearest: Vec<f64> = ds.records().map(|r| squared_distance(r, &centers[0])).collect();

    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` at the very top of the mass.
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).expect("positive mass"))
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = ds.record(pick).to_vec();
        for (w, r) in nearest.iter_mut().zip(ds.records()) {
            *w = w.min(squared_distance(r, &c));
        }
        centers.push(c);
    }
    Ok(centers)
}

fn uniform_seed(ds: &Dataset, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    sample(rng, ds.n(), k)
        .into_iter()
        .map(|i| ds.record(i).to_vec())
        .collect()
}

fn nearest_center(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(x, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn means(ds: &Dataset, labels: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; ds.d()]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in ds.records().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (sums, counts)
}

/// Lloyd's algorithm. Iterates assign/update until no center moves more than
/// `movement_threshold` or `max_iterations` is reached. A cluster left empty
/// by the assignment step takes over the record farthest from its own center
/// (drawn from clusters with at least two members), so all `k` clusters
/// survive.
pub fn kmeans(ds: &Dataset, cfg: &KMeansConfig) -> Result<(ClusterAssignment, KMeansTrace), ClusterError> {
    cfg.validate()?;
    let n = ds.n();
    let k = cfg.k;
    if k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    let mut rng = seeded_rng(cfg.rng_seed);
    let mut centers = match cfg.seeding {
        Seeding::UniformRandom => uniform_seed(ds, k, &mut rng),
        Seeding::PlusPlus => kmeans_pp_seed(ds, k, &mut rng)?,
    };

    let mut labels = vec![0usize; n];
    let mut trace = KMeansTrace {
        sse: Vec::new(),
        max_shift: Vec::new(),
        centers: Vec::new(),
        iterations_run: 0,
        converged: false,
    };
    for _ in 0..cfg.max_iterations {
        for (l, r) in labels.iter_mut().zip(ds.records()) {
            *l = nearest_center(r, &centers);
        }
        let (mut updated, mut counts) = means(ds, &labels, k);
        if counts.contains(&0) {
            repair_empty(ds, &mut labels, &mut updated, &mut counts);
            (updated, counts) = means(ds, &labels, k);
            debug_assert!(!counts.contains(&0));
        }
        let shift = centers
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = updated;
        let err: f64 = ds
            .records()
            .zip(&labels)
            .map(|(r, &l)| squared_distance(r, &centers[l]))
            .sum();
        trace.sse.push(err);
        trace.max_shift.push(shift);
        trace.iterations_run += 1;
        if shift <= cfg.movement_threshold {
            trace.converged = true;
            break;
        }
    }
    trace.centers = centers;
    let assignment = ClusterAssignment::from_labels(&labels).expect("n >= 1");
    Ok((assignment, trace))
}

fn repair_empty(ds: &Dataset, labels: &mut [usize], centers: &mut [Vec<f64>], counts: &mut [usize]) {
    let k = counts.len();
    for empty in 0..k {
        if counts[empty] != 0 {
            continue;
        }
        let mut donor: Option<(usize, f64)> = None;
        for (i, r) in ds.records().enumerate() {
            let l = labels[i];
            if counts[l] < 2 {
                continue;
            }
            let d = squared_distance(r, &centers[l]);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        let Some((i, _)) = donor else { return };
        counts[labels[i]] -= 1;
        labels[i] = empty;
        counts[empty] = 1;
        centers[empty] = ds.record(i).to_vec();
    }
}

/// Record `isolate` alone in cluster 1, everything else in cluster 0.
pub fn degenerate_one_vs_rest(ds: &Dataset, isolate: usize) -> Result<ClusterAssignment, ClusterError> {
    let n = ds.n();
    if n < 2 {
        return Err(ClusterError::TooFewRecords(n));
    }
    if isolate >= n {
        return Err(ClusterError::IndexOutOfRange { index: isolate, n });
    }
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i == isolate)).collect();
    Ok(ClusterAssignment::from_labels(&labels).expect("n >= 2"))
}
