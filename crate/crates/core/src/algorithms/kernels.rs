//! Scalar-generic update rules. Every neighborhood sum runs over the closed
//! neighborhood in ascending agent id, so two paths that share a kernel share
//! the floating-point association order.

use crate::error::{LabError, Result};
use crate::vector::{norm_sq_f64, Scalar};

/// Iterate norms above this abort the run.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Per-agent state of the buffered decentralized methods.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState<S> {
    pub id: usize,
    pub x: Vec<S>,
    /// Closed neighborhood `N̄_i`, ascending.
    pub neighborhood: Vec<usize>,
    /// `x_ij` for each entry of `neighborhood`; the slot of `id` itself is unused.
    pub buffer: Vec<Vec<S>>,
    pub pending_gradient: Option<Vec<S>>,
    pub update_count: u64,
}

impl<S: Scalar> AgentState<S> {
    pub fn new(id: usize, neighborhood: Vec<usize>, initial: &[Vec<S>]) -> Self {
        let buffer = neighborhood
            .iter()
            .map(|&j| if j == id { Vec::new() } else { initial[j].clone() })
            .collect();
        Self {
            id,
            x: initial[id].clone(),
            neighborhood,
            buffer,
            pending_gradient: None,
            update_count: 0,
        }
    }

    pub fn slot(&self, j: usize) -> Option<usize> {
        self.neighborhood.binary_search(&j).ok()
    }

    /// The model of `N̄_i[slot]` as seen by this agent.
    pub fn view(&self, slot: usize) -> &[S] {
        if self.neighborhood[slot] == self.id {
            &self.x
        } else {
            &self.buffer[slot]
        }
    }

    /// `Σ_{j∈N̄_i} w_ij x_ij` with `w_row` aligned to `neighborhood`.
    pub fn mixed(&self, w_row: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.x.len()];
        for (slot, w) in w_row.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.view(slot)) {
                *o = o.clone() + w.clone() * v.clone();
            }
        }
        out
    }
}

fn step_into<S: Scalar>(mut base: Vec<S>, step: &S, gradient: &[S]) -> Vec<S> {
    for (o, g) in base.iter_mut().zip(gradient) {
        *o = o.clone() - step.clone() * g.clone();
    }
    base
}

/// `w_ii x_i + Σ_{j∈N_i} w_ij x_ij − α g`
pub fn adsgd_update<S: Scalar>(state: &AgentState<S>, w_row: &[S], alpha: &S, gradient: &[S]) -> Vec<S> {
    step_into(state.mixed(w_row), alpha, gradient)
}

/// `[W̃ x̂]_i − β g`, with `w_tilde_row` taken from the transformed matrix.
pub fn double_step_update<S: Scalar>(state: &AgentState<S>, w_tilde_row: &[S], beta: &S, gradient: &[S]) -> Vec<S> {
    step_into(state.mixed(w_tilde_row), beta, gradient)
}

/// `(1 − β/α) x_i + (β/α)[W x̂]_i − β g`
pub fn double_step_direct<S: Scalar>(state: &AgentState<S>, w_row: &[S], alpha: &S, beta: &S, gradient: &[S]) -> Vec<S> {
    let r = beta.clone() / alpha.clone();
    let keep = S::one() - r.clone();
    let mixed = state.mixed(w_row);
    let blended = state
        .x
        .iter()
        .zip(mixed)
        .map(|(x, m)| keep.clone() * x.clone() + r.clone() * m)
        .collect();
    step_into(blended, beta, gradient)
}

/// Returns `(z, x + z)` with `z = (w_ii − 1) x + y − α g`.
pub fn memeff_update<S: Scalar>(x: &[S], y: &[S], w_ii: &S, alpha: &S, gradient: &[S]) -> (Vec<S>, Vec<S>) {
    let c = w_ii.clone() - S::one();
    let z: Vec<S> = x
        .iter()
        .zip(y)
        .zip(gradient)
        .map(|((xv, yv), g)| c.clone() * xv.clone() + yv.clone() - alpha.clone() * g.clone())
        .collect();
    let new_x = x.iter().zip(&z).map(|(a, b)| a.clone() + b.clone()).collect();
    (z, new_x)
}

/// `x_i − α g` where `g` was evaluated on the snapshot.
pub fn asbcd_update<S: Scalar>(block: &[S], alpha: &S, gradient_at_snapshot: &[S]) -> Vec<S> {
    step_into(block.to_vec(), alpha, gradient_at_snapshot)
}

pub fn check_divergence<S: Scalar>(x: &[S], agent: usize, update: u64, alpha: f64, beta: Option<f64>) -> Result<()> {
    let norm = norm_sq_f64(x).sqrt();
    if !norm.is_finite() || norm > DIVERGENCE_NORM {
        return Err(LabError::Divergence {
            agent,
            update,
            norm,
            alpha,
            beta,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamDomain};
    use rand::Rng;

    #[test]
    fn single_agent_is_sgd_step() {
        let s = AgentState::new(0, vec![0], &[vec![1.0]]);
        assert_eq!(adsgd_update(&s, &[1.0], &0.1, &[1.0]), vec![0.9]);
    }

    #[test]
    fn identity_mixing_with_zero_step_is_fixed_point() {
        let init = vec![vec![0.3, -1.0], vec![2.0, 5.0]];
        let s = AgentState::new(1, vec![0, 1], &init);
        assert_eq!(adsgd_update(&s, &[0.0, 1.0], &0.0, &[7.0, 7.0]), init[1]);
    }

    #[test]
    fn double_step_forms_agree() {
        let mut rng = stream(5, StreamDomain::Auxiliary, 0);
        for _ in 0..200 {
            let init: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
            let s = AgentState::new(1, vec![0, 1, 2], &init);
            let w = [0.25, 0.5, 0.25];
            let alpha = rng.gen_range(0.1..1.0);
            let beta = alpha * rng.gen_range(0.01..1.0);
            let r = beta / alpha;
            let wt = [r * w[0], (1.0 - r) + r * w[1], r * w[2]];
            let g: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = double_step_update(&s, &wt, &beta, &g);
            let b = double_step_direct(&s, &w, &alpha, &beta, &g);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn double_step_with_equal_steps_is_adsgd() {
        let init = vec![vec![0.7, 1.1], vec![-0.4, 2.5]];
        let s = AgentState::new(0, vec![0, 1], &init);
        let w = [0.5, 0.5];
        let g = [0.3, -0.2];
        assert_eq!(double_step_update(&s, &w, &0.2, &g), adsgd_update(&s, &w, &0.2, &g));
    }

    #[test]
    fn memeff_step_matches_buffered_form() {
        let init = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 0.0]];
        let s = AgentState::new(1, vec![0, 1, 2], &init);
        let w = [0.25, 0.5, 0.25];
        let y: Vec<f64> = (0..2).map(|k| 0.25 * init[0][k] + 0.25 * init[2][k]).collect();
        let g = [0.1, 0.2];
        let (_, x_new) = memeff_update(&init[1], &y, &0.5, &0.05, &g);
        let want = adsgd_update(&s, &w, &0.05, &g);
        for (a, b) in x_new.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn memeff_is_stationary_at_consensus() {
        let x = [0.5, -2.0];
        let y = [0.5 * 0.5, 0.5 * -2.0];
        let (z, _) = memeff_update(&x, &y, &0.5, &0.1, &[0.0, 0.0]);
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn divergence_detector() {
        assert!(check_divergence(&[f64::NAN], 0, 1, 0.1, None).is_err());
        assert!(check_divergence(&[2e12], 0, 1, 0.1, None).is_err());
        assert!(check_divergence(&[1e11], 0, 1, 0.1, None).is_ok());
    }
}
