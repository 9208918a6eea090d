use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::block::BlockGradientOracle;
use super::kernels::{asbcd_update, check_divergence};
use crate::error::{LabError, Result};
use crate::rng::{stream, SimRng, StreamDomain};
use crate::sim::AsyncAlgorithm;
use crate::vector::Scalar;

/// When a block reads its snapshot of the other blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotTiming {
    /// Before the gradient work begins.
    #[default]
    ComputeStart,
    /// At the commit instant, as the buffered decentralized method does.
    Commit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockAgent<S> {
    /// This agent's view of every block; its own slot is authoritative.
    pub view: Vec<Vec<S>>,
    pub pending_gradient: Option<Vec<S>>,
    pub update_count: u64,
}

/// Asynchronous stochastic block coordinate descent: agent `i` owns block `i`
/// and shares it with its neighbors.
pub struct Asbcd<S: Scalar> {
    agents: Vec<BlockAgent<S>>,
    oracle: Arc<dyn BlockGradientOracle<S>>,
    alpha: S,
    alpha_f64: f64,
    timing: SnapshotTiming,
    rngs: Vec<SimRng>,
}

impl<S: Scalar> Asbcd<S> {
    pub fn new(oracle: Arc<dyn BlockGradientOracle<S>>, alpha: f64, initial: Vec<Vec<S>>, timing: SnapshotTiming, seed: u64) -> Result<Self> {
        let n = oracle.n_blocks();
        if initial.len() != n {
            return Err(LabError::Config(format!("expected {n} initial blocks, got {}", initial.len())));
        }
        Ok(Self {
            agents: (0..n)
                .map(|_| BlockAgent {
                    view: initial.clone(),
                    pending_gradient: None,
                    update_count: 0,
                })
                .collect(),
            oracle,
            alpha: S::from_f64_exact(alpha),
            alpha_f64: alpha,
            timing,
            rngs: (0..n).map(|i| stream(seed, StreamDomain::GradientNoise, i as u64)).collect(),
        })
    }

    pub fn agent(&self, i: usize) -> &BlockAgent<S> {
        &self.agents[i]
    }

    fn gradient(&mut self, agent: usize) -> Vec<S> {
        self.oracle
            .block_gradient(agent, &self.agents[agent].view, &mut self.rngs[agent])
    }
}

impl<S: Scalar> AsyncAlgorithm for Asbcd<S> {
    type Scalar = S;
    type Message = Vec<S>;

    fn n_agents(&self) -> usize {
        self.agents.len()
    }

    fn initial_message(&self, agent: usize) -> Vec<S> {
        self.agents[agent].view[agent].clone()
    }

    fn on_compute_start(&mut self, agent: usize) {
        if self.timing == SnapshotTiming::ComputeStart {
            let g = self.gradient(agent);
            self.agents[agent].pending_gradient = Some(g);
        }
    }

    fn on_compute_done(&mut self, agent: usize) -> Result<Vec<S>> {
        let g = match self.timing {
            SnapshotTiming::ComputeStart => self.agents[agent]
                .pending_gradient
                .take()
                .ok_or_else(|| LabError::Trace(format!("block {agent} committed without a gradient")))?,
            SnapshotTiming::Commit => self.gradient(agent),
        };
        let a = &mut self.agents[agent];
        let next = asbcd_update(&a.view[agent], &self.alpha, &g);
        a.update_count += 1;
        check_divergence(&next, agent, a.update_count, self.alpha_f64, None)?;
        a.view[agent] = next;
        Ok(a.view[agent].clone())
    }

    fn on_arrival(&mut self, src: usize, dst: usize, _version: u64, msg: Vec<S>) {
        self.agents[dst].view[src] = msg;
    }

    fn coalesce(&self, pending: &mut Vec<S>, newer: Vec<S>) {
        *pending = newer;
    }

    fn iterate(&self, agent: usize) -> &[S] {
        &self.agents[agent].view[agent]
    }
}
