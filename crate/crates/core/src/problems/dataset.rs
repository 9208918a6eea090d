use std::fs;
use std::path::Path;

use rand::Rng;

use super::bounded_normal;
use crate::error::{LabError, Result};
use crate::rng::{stream, StreamDomain};

/// Maps a class label to a binary target in `{-1, +1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetRule {
    /// `+1` iff `label >= threshold`.
    Threshold(u32),
}

impl TargetRule {
    pub fn target(&self, label: u32) -> f64 {
        match *self {
            TargetRule::Threshold(t) => {
                if label >= t {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Row-major feature matrix with class labels and binary targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u32>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<u32>, rule: TargetRule) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Dataset("feature dimension must be ≥ 1".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(LabError::Dataset(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Dataset("non-finite feature value".into()));
        }
        let targets = labels.iter().map(|&l| rule.target(l)).collect();
        Ok(Self {
            dim,
            features,
            labels,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    /// Splits off the last `fraction` of rows, e.g. as a held-out set.
    pub fn split_tail(&self, fraction: f64) -> Result<(Dataset, Dataset)> {
        let n_tail = ((self.len() as f64) * fraction).round() as usize;
        if n_tail == 0 || n_tail >= self.len() {
            return Err(LabError::Dataset(format!("cannot hold out {fraction} of {} rows", self.len())));
        }
        let cut = self.len() - n_tail;
        let head = Dataset {
            dim: self.dim,
            features: self.features[..cut * self.dim].to_vec(),
            labels: self.labels[..cut].to_vec(),
            targets: self.targets[..cut].to_vec(),
        };
        let tail = Dataset {
            dim: self.dim,
            features: self.features[cut * self.dim..].to_vec(),
            labels: self.labels[cut..].to_vec(),
            targets: self.targets[cut..].to_vec(),
        };
        Ok((head, tail))
    }
}

/// Two Gaussian blobs at `±(separation/√dim)·𝟙` with unit covariance.
/// Labels alternate 0/1 before a seeded shuffle, so classes are balanced.
pub fn synthetic_blobs(samples: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if samples == 0 {
        return Err(LabError::Dataset("need at least one sample".into()));
    }
    let mut rng = stream(seed, StreamDomain::Problem, 1 << 40);
    let shift = separation / (dim as f64).sqrt();
    let mut order: Vec<usize> = (0..samples).collect();
    for i in (1..samples).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut features = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for &o in &order {
        let label = (o % 2) as u32;
        let sign = if label == 1 { 1.0 } else { -1.0 };
        for _ in 0..dim {
            features.push(sign * shift + bounded_normal(&mut rng));
        }
        labels.push(label);
    }
    Dataset::new(dim, features, labels, TargetRule::Threshold(1))
}

fn idx_header(bytes: &[u8], expected_dims: u8, what: &str) -> Result<(Vec<usize>, usize)> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(LabError::Dataset(format!("{what}: bad IDX magic")));
    }
    if bytes[2] != 0x08 {
        return Err(LabError::Dataset(format!(
            "{what}: unsupported IDX element type 0x{:02x} (only unsigned bytes)",
            bytes[2]
        )));
    }
    let ndims = bytes[3];
    if ndims != expected_dims {
        return Err(LabError::Dataset(format!("{what}: expected {expected_dims} dims, found {ndims}")));
    }
    let header_len = 4 + 4 * ndims as usize;
    if bytes.len() < header_len {
        return Err(LabError::Dataset(format!("{what}: truncated header")));
    }
    let dims: Vec<usize> = (0..ndims as usize)
        .map(|k| {
            let off = 4 + 4 * k;
            u32::from_be_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]) as usize
        })
        .collect();
    let body: usize = dims.iter().product();
    if bytes.len() != header_len + body {
        return Err(LabError::Dataset(format!(
            "{what}: body has {} bytes, header declares {body}",
            bytes.len() - header_len
        )));
    }
    Ok((dims, header_len))
}

/// Parses an IDX image file (3 dims) and label file (1 dim); pixels are
/// scaled to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8], rule: TargetRule) -> Result<Dataset> {
    let (idims, ioff) = idx_header(images, 3, "images")?;
    let (ldims, loff) = idx_header(labels, 1, "labels")?;
    if idims[0] != ldims[0] {
        return Err(LabError::Dataset(format!(
            "{} images but {} labels",
            idims[0], ldims[0]
        )));
    }
    let dim = idims[1] * idims[2];
    let features = images[ioff..].iter().map(|&p| p as f64 / 255.0).collect();
    let labels = labels[loff..].iter().map(|&l| l as u32).collect();
    Dataset::new(dim, features, labels, rule)
}

pub fn read_idx_pair(images: &Path, labels: &Path, rule: TargetRule) -> Result<Dataset> {
    parse_idx(&fs::read(images)?, &fs::read(labels)?, rule)
}

/// CSV with a header row; every column but the last is a feature and the last
/// is an integer class label.
pub fn parse_csv(text: &str, rule: TargetRule) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let width = reader
        .headers()
        .map_err(|e| LabError::Dataset(format!("csv header: {e}")))?
        .len();
    if width < 2 {
        return Err(LabError::Dataset("csv needs at least one feature and a label column".into()));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| LabError::Dataset(format!("csv row {}: {e}", line + 2)))?;
        if rec.len() != width {
            return Err(LabError::Dataset(format!(
                "csv row {} has {} fields, header has {width}",
                line + 2,
                rec.len()
            )));
        }
        for field in rec.iter().take(width - 1) {
            features.push(
                field
                    .parse::<f64>()
                    .map_err(|e| LabError::Dataset(format!("csv row {}: {e}", line + 2)))?,
            );
        }
        labels.push(
            rec[width - 1]
                .parse::<u32>()
                .map_err(|e| LabError::Dataset(format!("csv row {} label: {e}", line + 2)))?,
        );
    }
    Dataset::new(width - 1, features, labels, rule)
}

pub fn read_csv(path: &Path, rule: TargetRule) -> Result<Dataset> {
    parse_csv(&fs::read_to_string(path)?, rule)
}
