use super::adsgd::{check_initial, neighborhoods};
use super::kernels::{check_divergence, memeff_update};
use crate::error::{LabError, Result};
use crate::graph::MixingMatrix;
use crate::problems::OracleSet;
use crate::rng::{stream, SimRng, StreamDomain};
use crate::sim::AsyncAlgorithm;
use crate::vector::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct MemEffState<S> {
    pub x: Vec<S>,
    /// `Σ_{j∈N_i} w_ij x_ij`
    pub y: Vec<S>,
    /// Last update message sent.
    pub z: Vec<S>,
    pub pending_gradient: Option<Vec<S>>,
    pub update_count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MemEffMessage<S> {
    /// The `t = 0` broadcast; receivers already hold it in `y`.
    Initial(Vec<S>),
    Delta(Vec<S>),
}

/// Memory-efficient ADSGD: agents keep only the weighted neighbor sum and
/// exchange update increments.
pub struct MemEffAdsgd<S: Scalar> {
    agents: Vec<MemEffState<S>>,
    w: Vec<Vec<S>>,
    alpha: S,
    alpha_f64: f64,
    oracles: OracleSet<S>,
    rngs: Vec<SimRng>,
}

impl<S: Scalar> MemEffAdsgd<S> {
    pub fn new(w: &MixingMatrix, alpha: f64, oracles: OracleSet<S>, initial: Vec<Vec<S>>, seed: u64) -> Result<Self> {
        let n = w.n();
        check_initial(n, oracles.len(), &initial)?;
        let dense: Vec<Vec<S>> = (0..n)
            .map(|i| (0..n).map(|j| S::from_f64_exact(w.get(i, j))).collect())
            .collect();
        let nbhd = neighborhoods(w);
        let d = initial[0].len();
        let agents = (0..n)
            .map(|i| {
                let mut y = vec![S::zero(); d];
                for &j in nbhd[i].iter().filter(|&&j| j != i) {
                    for (o, v) in y.iter_mut().zip(&initial[j]) {
                        *o = o.clone() + dense[i][j].clone() * v.clone();
                    }
                }
                MemEffState {
                    x: initial[i].clone(),
                    y,
                    z: vec![S::zero(); d],
                    pending_gradient: None,
                    update_count: 0,
                }
            })
            .collect();
        Ok(Self {
            agents,
            w: dense,
            alpha: S::from_f64_exact(alpha),
            alpha_f64: alpha,
            oracles,
            rngs: (0..n).map(|i| stream(seed, StreamDomain::GradientNoise, i as u64)).collect(),
        })
    }

    pub fn state(&self, i: usize) -> &MemEffState<S> {
        &self.agents[i]
    }
}

impl<S: Scalar> AsyncAlgorithm for MemEffAdsgd<S> {
    type Scalar = S;
    type Message = MemEffMessage<S>;

    fn n_agents(&self) -> usize {
        self.agents.len()
    }

    fn initial_message(&self, agent: usize) -> MemEffMessage<S> {
        MemEffMessage::Initial(self.agents[agent].x.clone())
    }

    fn on_compute_start(&mut self, agent: usize) {
        let a = &mut self.agents[agent];
        a.pending_gradient = Some(self.oracles[agent].sample_gradient(&a.x, &mut self.rngs[agent]));
    }

    fn on_compute_done(&mut self, agent: usize) -> Result<MemEffMessage<S>> {
        let w_ii = self.w[agent][agent].clone();
        let a = &mut self.agents[agent];
        let g = a
            .pending_gradient
            .take()
            .ok_or_else(|| LabError::Trace(format!("agent {agent} committed without a gradient")))?;
        let (z, next) = memeff_update(&a.x, &a.y, &w_ii, &self.alpha, &g);
        a.update_count += 1;
        check_divergence(&next, agent, a.update_count, self.alpha_f64, None)?;
        a.x = next;
        a.z = z.clone();
        Ok(MemEffMessage::Delta(z))
    }

    fn on_arrival(&mut self, src: usize, dst: usize, _version: u64, msg: MemEffMessage<S>) {
        if let MemEffMessage::Delta(z) = msg {
            let w = self.w[dst][src].clone();
            for (o, v) in self.agents[dst].y.iter_mut().zip(z) {
                *o = o.clone() + w.clone() * v;
            }
        }
    }

    fn coalesce(&self, pending: &mut MemEffMessage<S>, newer: MemEffMessage<S>) {
        match (&mut *pending, newer) {
            (MemEffMessage::Delta(acc), MemEffMessage::Delta(z)) => {
                for (a, b) in acc.iter_mut().zip(z) {
                    *a = a.clone() + b;
                }
            }
            (_, newer) => *pending = newer,
        }
    }

    fn iterate(&self, agent: usize) -> &[S] {
        &self.agents[agent].x
    }
}
