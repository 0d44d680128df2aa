//! EEG epoch features.
//!
//! Each channel is cut into consecutive, non-overlapping epochs (10 s by
//! default; a trailing partial epoch is dropped). Every epoch yields nine
//! features: max, min, mean, population std, raw kurtosis `m4 / m2^2`,
//! skewness `m3 / m2^1.5`, histogram entropy, line length and energy. An epoch
//! is labeled `seizure` when it overlaps an annotated seizure interval by a
//! positive duration.
//!
//! The entropy feature is the Shannon entropy (bits) of an equal-width
//! amplitude histogram over `[min, max]` with `ceil(sqrt(N))` bins by default.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::dataset::{Dataset, DatasetError};

pub const FEATURE_NAMES: [&str; 9] = [
    "Max",
    "Min",
    "Mean",
    "Std",
    "Kurtosis",
    "Skewness",
    "Entropy",
    "LineLength",
    "Energy",
];

pub const SEIZURE: &str = "seizure";
pub const NON_SEIZURE: &str = "non-seizure";

#[derive(Debug, thiserror::Error)]
pub enum EegError {
    #[error("channel `{channel}` has {samples} samples, fewer than one epoch of {epoch_len}")]
    TooShort {
        channel: String,
        samples: usize,
        epoch_len: usize,
    },
    #[error("sample rate and epoch length must be positive")]
    BadTiming,
    #[error("channel `{channel}`: sample {index} is not finite")]
    NonFinite { channel: String, index: usize },
    #[error("no channels given")]
    NoChannels,
    #[error("seizure interval [{start}, {end}) is invalid")]
    BadInterval { start: f64, end: f64 },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: `{text}` is not a finite real")]
    BadSample { path: String, line: usize, text: String },
    #[error("manifest {path}: {message}")]
    BadManifest { path: String, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSignal {
    pub channel_id: String,
    pub samples: Vec<f64>,
    /// Samples per second.
    pub sample_rate: u32,
}

impl ChannelSignal {
    pub fn new(channel_id: impl Into<String>, samples: Vec<f64>, sample_rate: u32) -> Result<Self, EegError> {
        let channel_id = channel_id.into();
        if sample_rate == 0 {
            return Err(EegError::BadTiming);
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(EegError::NonFinite { channel: channel_id, index });
        }
        Ok(Self {
            channel_id,
            samples,
            sample_rate,
        })
    }
}

/// One fixed-length window of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch<'a> {
    pub channel_id: &'a str,
    pub epoch_index: usize,
    pub samples: &'a [f64],
    pub start_second: f64,
    pub end_second: f64,
}

/// Half-open `[start_second, end_second)` seizure annotation.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SeizureInterval {
    pub start_second: f64,
    pub end_second: f64,
}

impl SeizureInterval {
    pub fn new(start_second: f64, end_second: f64) -> Result<Self, EegError> {
        if !(start_second >= 0.0 && start_second < end_second && end_second.is_finite()) {
            return Err(EegError::BadInterval {
                start: start_second,
                end: end_second,
            });
        }
        Ok(Self {
            start_second,
            end_second,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochLabel {
    Seizure,
    NonSeizure,
}

impl EpochLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EpochLabel::Seizure => SEIZURE,
            EpochLabel::NonSeizure => NON_SEIZURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRecord {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
    pub kurtosis: f64,
    pub skewness: f64,
    pub entropy: f64,
    pub line_length: f64,
    pub energy: f64,
    /// Set when the epoch has zero variance and the shape moments were
    /// reported as 0.
    pub degenerate: bool,
}

impl FeatureRecord {
    pub fn values(&self) -> [f64; 9] {
        [
            self.max,
            self.min,
            self.mean,
            self.std,
            self.kurtosis,
            self.skewness,
            self.entropy,
            self.line_length,
            self.energy,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureOptions {
    /// Histogram bins for the entropy feature; `None` means `ceil(sqrt(N))`.
    pub histogram_bins: Option<usize>,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { histogram_bins: None }
    }
}

pub const DEFAULT_EPOCH_SECONDS: u32 = 10;

/// Splits a channel into consecutive full epochs.
pub fn epoch_signal(sig: &ChannelSignal, epoch_seconds: u32) -> Result<Vec<Epoch<'_>>, EegError> {
    if epoch_seconds == 0 || sig.sample_rate == 0 {
        return Err(EegError::BadTiming);
    }
    let epoch_len = sig.sample_rate as usize * epoch_seconds as usize;
    if sig.samples.len() < epoch_len {
        return Err(EegError::TooShort {
            channel: sig.channel_id.clone(),
            samples: sig.samples.len(),
            epoch_len,
        });
    }
    let span = f64::from(epoch_seconds);
    Ok(sig
        .samples
        .chunks_exact(epoch_len)
        .enumerate()
        .map(|(epoch_index, samples)| Epoch {
            channel_id: &sig.channel_id,
            epoch_index,
            samples,
            start_second: epoch_index as f64 * span,
            end_second: (epoch_index + 1) as f64 * span,
        })
        .collect())
}

/// Computes the nine features of a sample window. Returns `None` for an empty
/// window.
pub fn extract_features(samples: &[f64], options: &FeatureOptions) -> Option<FeatureRecord> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sum = 0.0;
    let mut energy = 0.0;
    for &x in samples {
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
        energy += x * x;
    }
    let mean = (sum / n).clamp(lo, hi);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let dev = x - mean;
        let sq = dev * dev;
        m2 += sq;
        m3 += sq * dev;
        m4 += sq * sq;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let degenerate = !(m2 > 0.0) || hi == lo;
    let (skewness, kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };
    let line_length = samples.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let bins = options
        .histogram_bins
        .unwrap_or_else(|| (samples.len() as f64).sqrt().ceil() as usize)
        .max(1);
    Some(FeatureRecord {
        max: hi,
        min: lo,
        mean,
        std: if degenerate { 0.0 } else { m2.sqrt() },
        kurtosis,
        skewness,
        entropy: histogram_entropy(samples, lo, hi, bins),
        line_length,
        energy,
        degenerate,
    })
}

fn histogram_entropy(samples: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let range = hi - lo;
    if !(range > 0.0) || bins == 1 {
        return 0.0;
    }
    let mut hist = vec![0usize; bins];
    for &x in samples {
        let b = ((x - lo) / range * bins as f64) as usize;
        hist[b.min(bins - 1)] += 1;
    }
    let n = samples.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// `Seizure` iff the epoch overlaps some interval by a positive duration.
pub fn label_epoch(epoch: &Epoch<'_>, intervals: &[SeizureInterval]) -> EpochLabel {
    let hit = intervals.iter().any(|iv| {
        epoch.start_second.max(iv.start_second) < epoch.end_second.min(iv.end_second)
    });
    if hit {
        EpochLabel::Seizure
    } else {
        EpochLabel::NonSeizure
    }
}

/// Features and labels for every epoch of every channel, in channel order
/// then epoch order. Channels are processed in parallel.
pub fn build_eeg_dataset(
    name: impl Into<String>,
    channels: &[ChannelSignal],
    intervals: &[SeizureInterval],
    epoch_seconds: u32,
    options: &FeatureOptions,
) -> Result<Dataset, EegError> {
    if channels.is_empty() {
        return Err(EegError::NoChannels);
    }
    let per_channel: Vec<Vec<(FeatureRecord, EpochLabel)>> = channels
        .par_iter()
        .map(|sig| {
            let epochs = epoch_signal(sig, epoch_seconds)?;
            Ok(epochs
                .iter()
                .map(|ep| {
                    let f = extract_features(ep.samples, options).expect("epochs are non-empty");
                    (f, label_epoch(ep, intervals))
                })
                .collect())
        })
        .collect::<Result<_, EegError>>()?;

    let total: usize = per_channel.iter().map(Vec::len).sum();
    let mut rows = Vec::with_capacity(total);
    let mut classes = Vec::with_capacity(total);
    for (f, label) in per_channel.into_iter().flatten() {
        rows.push(f.values().to_vec());
        classes.push(label.as_str().to_string());
    }
    Ok(Dataset::new(
        name,
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
        Some(classes),
    )?)
}

/// Describes a recording: one sample file per channel plus timing and
/// seizure annotations. Stored as JSON:
///
/// ```json
/// {
///   "sample_rate": 256,
///   "epoch_seconds": 10,
///   "channels": [{"id": "FP1-F7", "file": "fp1-f7.txt"}],
///   "seizures": [{"start_second": 2996, "end_second": 3036}]
/// }
/// ```
///
/// Relative channel paths resolve against the manifest's directory. Sample
/// files hold one real per line; blank lines are skipped. Other recording
/// formats can be supported by converting them to this layout.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub name: Option<String>,
    pub sample_rate: u32,
    #[serde(default = "default_epoch_seconds")]
    pub epoch_seconds: u32,
    pub channels: Vec<ManifestChannel>,
    #[serde(default)]
    pub seizures: Vec<SeizureInterval>,
    #[serde(default)]
    pub histogram_bins: Option<usize>,
}

fn default_epoch_seconds() -> u32 {
    DEFAULT_EPOCH_SECONDS
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestChannel {
    pub id: String,
    pub file: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EegError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EegError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| EegError::BadManifest {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for ch in &mut manifest.channels {
            if ch.file.is_relative() {
                ch.file = base.join(&ch.file);
            }
        }
        for iv in &manifest.seizures {
            SeizureInterval::new(iv.start_second, iv.end_second)?;
        }
        if manifest.name.is_none() {
            manifest.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(manifest)
    }

    /// Reads every channel file.
    pub fn read_channels(&self) -> Result<Vec<ChannelSignal>, EegError> {
        self.channels
            .par_iter()
            .map(|ch| ChannelSignal::new(ch.id.clone(), read_samples(&ch.file)?, self.sample_rate))
            .collect()
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            histogram_bins: self.histogram_bins,
        }
    }

    /// Loads the channels and builds the labeled feature dataset.
    pub fn build_dataset(&self) -> Result<Dataset, EegError> {
        let channels = self.read_channels()?;
        build_eeg_dataset(
            self.name.clone().unwrap_or_else(|| "eeg".to_string()),
            &channels,
            &self.seizures,
            self.epoch_seconds,
            &self.feature_options(),
        )
    }
}

/// Reads a single-column sample file.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, EegError> {
    let text = fs::read_to_string(path).map_err(|source| EegError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => {
                return Err(EegError::BadSample {
                    path: path.display().to_string(),
                    line: i + 1,
                    text: t.to_string(),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn channel(len: usize) -> ChannelSignal {
        ChannelSignal::new("c", (0..len).map(|i| (i % 17) as f64).collect(), 256).unwrap()
    }

    #[test]
    fn epoch_counts() {
        assert_eq!(epoch_signal(&channel(921_600), 10).unwrap().len(), 360);
        let long = channel(925_000);
        let eps = epoch_signal(&long, 10).unwrap();
        assert_eq!(eps.len(), 361);
        assert!(eps.iter().all(|e| e.samples.len() == 2560));
        assert_eq!(eps[3].start_second, 30.0);
        assert_eq!(eps[3].end_second, 40.0);
        assert!(matches!(
            epoch_signal(&channel(1000), 10),
            Err(EegError::TooShort { samples: 1000, epoch_len: 2560, .. })
        ));
    }

    #[test]
    fn constant_epoch_features() {
        let f = extract_features(&[4.0; 50], &FeatureOptions::default()).unwrap();
        assert_eq!((f.max, f.min, f.mean, f.std), (4.0, 4.0, 4.0, 0.0));
        assert_eq!((f.line_length, f.energy, f.entropy), (0.0, 800.0, 0.0));
        assert_eq!((f.skewness, f.kurtosis), (0.0, 0.0));
        assert!(f.degenerate);
    }

    #[test]
    fn two_sample_features() {
        let f = extract_features(&[3.0, 4.0], &FeatureOptions::default()).unwrap();
        assert_eq!((f.line_length, f.energy, f.mean), (1.0, 25.0, 3.5));
        assert_eq!(f.std, 0.5);
        assert_eq!(f.skewness, 0.0);
        assert_eq!(f.kurtosis, 1.0);
        assert_eq!(f.entropy, 1.0);
        assert!(extract_features(&[], &FeatureOptions::default()).is_none());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let samples: Vec<f64> = (0..2560).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = extract_features(&samples, &FeatureOptions::default()).unwrap();
        assert!(f.skewness.abs() < 0.15, "skewness {}", f.skewness);
        assert!((f.kurtosis - 3.0).abs() < 0.5, "kurtosis {}", f.kurtosis);
    }

    #[test]
    fn seizure_labels() {
        let sig = channel(921_600);
        let eps = epoch_signal(&sig, 10).unwrap();
        let iv = [SeizureInterval::new(2996.0, 3036.0).unwrap()];
        let hits: Vec<usize> = eps
            .iter()
            .filter(|e| label_epoch(e, &iv) == EpochLabel::Seizure)
            .map(|e| e.epoch_index)
            .collect();
        assert_eq!(hits, vec![299, 300, 301, 302, 303]);
        assert_eq!(label_epoch(&eps[304], &iv), EpochLabel::NonSeizure);
        assert!(SeizureInterval::new(5.0, 5.0).is_err());
    }

    #[test]
    fn dataset_from_channels() {
        let short = ChannelSignal::new("a", vec![1.0; 25_600], 256).unwrap();
        let ds = build_eeg_dataset("x", &[short.clone()], &[], 10, &FeatureOptions::default()).unwrap();
        assert_eq!((ds.n(), ds.d()), (10, 9));
        assert!(ds.true_classes().unwrap().iter().all(|c| c == NON_SEIZURE));

        let longer = ChannelSignal::new("b", vec![2.0; 2560 * 3 + 100], 256).unwrap();
        let ds = build_eeg_dataset("x", &[short, longer], &[], 10, &FeatureOptions::default()).unwrap();
        assert_eq!(ds.n(), 13);
        assert_eq!(ds.record(12)[0], 2.0);
        assert!(matches!(
            build_eeg_dataset("x", &[], &[], 10, &FeatureOptions::default()),
            Err(EegError::NoChannels)
        ));
    }

    #[test]
    fn non_finite_samples_rejected() {
        assert!(matches!(
            ChannelSignal::new("z", vec![1.0, f64::NAN], 256),
            Err(EegError::NonFinite { index: 1, .. })
        ));
    }
}
