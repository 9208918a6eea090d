//! Reported quantities: loss and gradient at the average model, consensus
//! error, time-to-target and speedup.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::problems::GlobalObjective;
use crate::vector::ModelVector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub sim_time: f64,
    pub k: u64,
    /// `f(x̄)` on the unweighted global objective.
    pub loss_at_mean: f64,
    /// `Σ_i ‖x_i − x̄‖²`
    pub consensus_error: f64,
    /// `‖∇f(x̄)‖²`
    pub grad_norm_sq: f64,
}

pub fn average_model<M: AsRef<[f64]>>(states: &[M]) -> Result<ModelVector> {
    let first = states
        .first()
        .ok_or_else(|| LabError::Problem("average of zero models".into()))?;
    let d = first.as_ref().len();
    let mut sum = vec![0.0; d];
    for s in states {
        let s = s.as_ref();
        if s.len() != d {
            return Err(LabError::Problem(format!("model dimension {} differs from {d}", s.len())));
        }
        for (o, v) in sum.iter_mut().zip(s) {
            *o += v;
        }
    }
    let n = states.len() as f64;
    Ok(ModelVector::from_vec(sum.into_iter().map(|v| v / n).collect()))
}

pub fn consensus_error<M: AsRef<[f64]>>(states: &[M]) -> f64 {
    let Ok(mean) = average_model(states) else {
        return 0.0;
    };
    states
        .iter()
        .map(|s| {
            s.as_ref()
                .iter()
                .zip(mean.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// One sample at simulated time `sim_time` after `k` committed updates.
pub fn sample<M: AsRef<[f64]>>(objective: &GlobalObjective, sim_time: f64, k: u64, states: &[M]) -> Result<MetricSample> {
    let mean = average_model(states)?;
    if mean.dim() != objective.dim() {
        return Err(LabError::Problem(format!(
            "model dimension {} does not match objective dimension {}",
            mean.dim(),
            objective.dim()
        )));
    }
    Ok(MetricSample {
        sim_time,
        k,
        loss_at_mean: objective.loss(mean.as_slice()),
        consensus_error: consensus_error(states),
        grad_norm_sq: objective.gradient(mean.as_slice()).norm_sq(),
    })
}

/// Samples a batch of recorded snapshots in parallel.
pub fn sample_all(objective: &GlobalObjective, snapshots: &[(f64, u64, Vec<Vec<f64>>)]) -> Result<Vec<MetricSample>> {
    snapshots
        .par_iter()
        .map(|(t, k, states)| sample(objective, *t, *k, states))
        .collect()
}

/// Mean of `‖∇f(x̄ᵏ)‖²` over the samples.
pub fn running_grad_metric(samples: &[MetricSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(LabError::Problem("gradient metric needs at least one sample".into()));
    }
    Ok(samples.iter().map(|s| s.grad_norm_sq).sum::<f64>() / samples.len() as f64)
}

/// Averages per-seed running gradient metrics.
pub fn seed_average_grad_metric(per_seed: &[Vec<MetricSample>]) -> Result<f64> {
    if per_seed.is_empty() {
        return Err(LabError::Problem("no seeds to average".into()));
    }
    let means = per_seed.iter().map(|s| running_grad_metric(s)).collect::<Result<Vec<_>>>()?;
    Ok(means.iter().sum::<f64>() / means.len() as f64)
}

/// First sample time at or below `target`, without interpolation.
pub fn time_to_target(series: &[MetricSample], target_loss: f64) -> Option<f64> {
    series.iter().find(|s| s.loss_at_mean <= target_loss).map(|s| s.sim_time)
}

/// `time(baseline)/time(n)` with the smallest `n` as baseline; entries whose
/// target was unreached, or any entry when the baseline is unreached, map
/// to `None`.
pub fn speedup(times: &BTreeMap<usize, Option<f64>>) -> Result<BTreeMap<usize, Option<f64>>> {
    let (_, base) = times
        .iter()
        .next()
        .ok_or_else(|| LabError::Problem("speedup needs a baseline entry".into()))?;
    Ok(times
        .iter()
        .map(|(&n, t)| (n, base.zip(*t).filter(|(_, t)| *t > 0.0).map(|(b, t)| b / t)))
        .collect())
}

pub const METRICS_HEADER: &str = "sim_time,k,loss_mean,consensus_err,grad_norm_sq,seed,algorithm,case";

#[derive(Clone, Copy, Debug)]
pub struct SeriesLabel<'a> {
    pub seed: u64,
    pub algorithm: &'a str,
    pub case: &'a str,
}

/// CSV text with a leading `# config_hash=` line when a hash is given.
pub fn metrics_csv(config_hash: Option<&str>, series: &[(SeriesLabel<'_>, &[MetricSample])]) -> String {
    let mut out = String::new();
    if let Some(h) = config_hash {
        out.push_str(&format!("# config_hash={h}\n"));
    }
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for (label, samples) in series {
        for s in samples.iter() {
            out.push_str(&format!(
                "{:?},{},{:?},{:?},{:?},{},{},{}\n",
                s.sim_time, s.k, s.loss_at_mean, s.consensus_error, s.grad_norm_sq, label.seed, label.algorithm, label.case
            ));
        }
    }
    out
}

pub fn write_metrics_csv(path: &Path, config_hash: Option<&str>, series: &[(SeriesLabel<'_>, &[MetricSample])]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(metrics_csv(config_hash, series).as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct MetricRow {
    pub sim_time: f64,
    pub k: u64,
    pub loss_mean: f64,
    pub consensus_err: f64,
    pub grad_norm_sq: f64,
    pub seed: u64,
    pub algorithm: String,
    pub case: String,
}

impl MetricRow {
    pub fn sample(&self) -> MetricSample {
        MetricSample {
            sim_time: self.sim_time,
            k: self.k,
            loss_at_mean: self.loss_mean,
            consensus_error: self.consensus_err,
            grad_norm_sq: self.grad_norm_sq,
        }
    }
}

/// Parses metrics CSV text; returns the config hash line if present.
pub fn parse_metrics_csv(text: &str) -> Result<(Option<String>, Vec<MetricRow>)> {
    let hash = text
        .lines()
        .find_map(|l| l.strip_prefix("# config_hash=").map(str::to_string));
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<MetricRow>, _>>()
        .map_err(|e| LabError::Trace(format!("metrics CSV: {e}")))?;
    Ok((hash, rows))
}
