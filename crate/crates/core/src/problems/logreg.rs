use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use super::{partition_dataset, Dataset, LocalProblem, PartitionSpec};
use crate::error::{LabError, Result};
use crate::rng::SimRng;
use crate::vector::ModelVector;

/// Binary logistic loss on one shard plus the bounded non-convex penalty
/// `reg_weight · Σ_j x_j² / (1 + x_j²)`.
#[derive(Debug)]
pub struct LogisticProblem {
    agent_id: usize,
    data: Arc<Dataset>,
    shard: Vec<usize>,
    reg_weight: f64,
    batch_size: usize,
    smoothness: f64,
    variance_bound: f64,
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest eigenvalue of `XᵀX / m` for the rows in `shard`.
fn gram_top_eigenvalue(data: &Dataset, shard: &[usize]) -> f64 {
    let d = data.dim();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for &s in shard {
        let row = data.row(s);
        for r in 0..d {
            for c in 0..d {
                gram[(r, c)] += row[r] * row[c];
            }
        }
    }
    gram /= shard.len() as f64;
    gram.symmetric_eigen().eigenvalues.iter().cloned().fold(0.0, f64::max)
}

impl LogisticProblem {
    pub fn new(agent_id: usize, data: Arc<Dataset>, shard: Vec<usize>, reg_weight: f64, batch_size: usize) -> Result<Self> {
        if shard.is_empty() {
            return Err(LabError::Problem(format!("agent {agent_id} received an empty shard")));
        }
        if batch_size == 0 {
            return Err(LabError::Problem("batch size must be ≥ 1".into()));
        }
        if !(reg_weight >= 0.0) {
            return Err(LabError::Problem("regularization weight must be ≥ 0".into()));
        }
        if let Some(&bad) = shard.iter().find(|&&s| s >= data.len()) {
            return Err(LabError::Problem(format!("shard index {bad} out of range")));
        }
        let smoothness = 0.25 * gram_top_eigenvalue(&data, &shard) + 2.0 * reg_weight;
        // per-sample data-term gradients have norm ≤ ‖a_s‖
        let mean_sq_norm = shard
            .iter()
            .map(|&s| data.row(s).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / shard.len() as f64;
        Ok(Self {
            agent_id,
            variance_bound: mean_sq_norm / batch_size as f64,
            data,
            shard,
            reg_weight,
            batch_size,
            smoothness,
        })
    }

    pub fn shard(&self) -> &[usize] {
        &self.shard
    }

    pub fn reg_weight(&self) -> f64 {
        self.reg_weight
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn margin(&self, s: usize, x: &[f64]) -> f64 {
        let row = self.data.row(s);
        self.data.target(s) * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn sample_loss(&self, s: usize, x: &[f64]) -> f64 {
        softplus(-self.margin(s, x))
    }

    /// Adds `weight · ∇ℓ(x; s)` into `out`.
    pub fn accumulate_sample_gradient(&self, s: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let y = self.data.target(s);
        let coef = -weight * y * sigmoid(-self.margin(s, x));
        for (o, a) in out.iter_mut().zip(self.data.row(s)) {
            *o += coef * a;
        }
    }

    pub fn regularizer(&self, x: &[f64]) -> f64 {
        self.reg_weight * x.iter().map(|v| v * v / (1.0 + v * v)).sum::<f64>()
    }

    pub fn regularizer_gradient(&self, x: &[f64]) -> ModelVector {
        ModelVector::from_vec(
            x.iter()
                .map(|v| {
                    let q = 1.0 + v * v;
                    2.0 * self.reg_weight * v / (q * q)
                })
                .collect(),
        )
    }

    /// Mean logistic loss over an arbitrary index set of the same dataset.
    pub fn data_loss_on(&self, indices: &[usize], x: &[f64]) -> f64 {
        indices.iter().map(|&s| self.sample_loss(s, x)).sum::<f64>() / indices.len() as f64
    }
}

impl LocalProblem for LogisticProblem {
    fn agent_id(&self) -> usize {
        self.agent_id
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        self.data_loss_on(&self.shard, x) + self.regularizer(x)
    }

    fn full_gradient(&self, x: &[f64]) -> ModelVector {
        let mut g = self.regularizer_gradient(x);
        let w = 1.0 / self.shard.len() as f64;
        for &s in &self.shard {
            self.accumulate_sample_gradient(s, x, w, g.as_mut_slice());
        }
        g
    }

    /// Minibatch drawn uniformly with replacement from the shard.
    fn stochastic_gradient(&self, x: &[f64], rng: &mut SimRng) -> ModelVector {
        let mut g = self.regularizer_gradient(x);
        let w = 1.0 / self.batch_size as f64;
        for _ in 0..self.batch_size {
            let s = self.shard[rng.gen_range(0..self.shard.len())];
            self.accumulate_sample_gradient(s, x, w, g.as_mut_slice());
        }
        g
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn variance_bound(&self) -> f64 {
        self.variance_bound
    }
}

pub fn make_nonconvex_logreg(
    dataset: Arc<Dataset>,
    partition: &PartitionSpec,
    reg_weight: f64,
    batch_size: usize,
) -> Result<Vec<Arc<LogisticProblem>>> {
    if dataset.is_empty() {
        return Err(LabError::Problem("dataset is empty".into()));
    }
    let shards = partition_dataset(&dataset, partition)?;
    shards
        .into_iter()
        .enumerate()
        .map(|(i, shard)| LogisticProblem::new(i, dataset.clone(), shard, reg_weight, batch_size).map(Arc::new))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::TargetRule;
    use crate::rng::{stream, StreamDomain};

    fn tiny() -> Arc<Dataset> {
        let feats = vec![1.0, 2.0, -0.5, 1.0, 0.3, -1.0, 2.0, 0.0];
        Arc::new(Dataset::new(2, feats, vec![0, 1, 0, 1], TargetRule::Threshold(1)).unwrap())
    }

    #[test]
    fn zero_model_has_log_two_loss() {
        let p = LogisticProblem::new(0, tiny(), vec![0, 1, 2, 3], 0.3, 4).unwrap();
        assert!((p.loss(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn empty_shard_is_rejected() {
        assert!(LogisticProblem::new(0, tiny(), vec![], 0.1, 4).is_err());
    }

    #[test]
    fn stable_for_large_margins() {
        let p = LogisticProblem::new(0, tiny(), vec![0, 1], 0.0, 1).unwrap();
        let l = p.loss(&[800.0, -800.0]);
        assert!(l.is_finite());
        assert!(p.full_gradient(&[800.0, -800.0]).is_finite());
    }

    #[test]
    fn minibatch_stream_is_deterministic() {
        let p = LogisticProblem::new(0, tiny(), vec![0, 1, 2, 3], 0.1, 2).unwrap();
        let mut a = stream(3, StreamDomain::GradientNoise, 0);
        let mut b = stream(3, StreamDomain::GradientNoise, 0);
        for _ in 0..10 {
            assert_eq!(p.stochastic_gradient(&[0.2, 0.1], &mut a), p.stochastic_gradient(&[0.2, 0.1], &mut b));
        }
    }
}
