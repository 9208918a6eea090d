use super::adsgd::{check_initial, neighborhoods, restricted_rows};
use super::kernels::{adsgd_update, check_divergence, AgentState};
use crate::error::Result;
use crate::graph::MixingMatrix;
use crate::problems::OracleSet;
use crate::rng::{stream, SimRng, StreamDomain};
use crate::sim::{Exchange, RoundAlgorithm};

/// `x_i ← Σ_j w_ij x_j − α g_i` for every agent at once.
pub fn sync_dsgd_round(states: &mut [Vec<f64>], w: &MixingMatrix, gradients: &[Vec<f64>], alpha: f64) {
    let nbhd = neighborhoods(w);
    let rows: Vec<Vec<f64>> = restricted_rows(w, &nbhd);
    let next: Vec<Vec<f64>> = nbhd
        .into_iter()
        .enumerate()
        .map(|(i, js)| adsgd_update(&AgentState::new(i, js, states), &rows[i], &alpha, &gradients[i]))
        .collect();
    for (s, v) in states.iter_mut().zip(next) {
        *s = v;
    }
}

fn chunk(d: usize, n: usize, c: usize) -> std::ops::Range<usize> {
    c * d / n..(c + 1) * d / n
}

/// Ring all-reduce over agents in id order: reduce-scatter then all-gather of
/// `n` equal chunks. Returns every agent's copy of `Σ_i g_i`.
pub fn ring_allreduce(gradients: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = gradients.len();
    let d = gradients.first().map_or(0, |g| g.len());
    let mut buf = gradients.to_vec();
    for s in 0..n.saturating_sub(1) {
        let sent: Vec<(usize, Vec<f64>)> = (0..n)
            .map(|i| {
                let c = (i + n - s) % n;
                (c, buf[i][chunk(d, n, c)].to_vec())
            })
            .collect();
        for (i, (c, data)) in sent.into_iter().enumerate() {
            let r = chunk(d, n, c);
            for (o, v) in buf[(i + 1) % n][r].iter_mut().zip(data) {
                *o += v;
            }
        }
    }
    for s in 0..n.saturating_sub(1) {
        let sent: Vec<(usize, Vec<f64>)> = (0..n)
            .map(|i| {
                let c = (i + 1 + n - s) % n;
                (c, buf[i][chunk(d, n, c)].to_vec())
            })
            .collect();
        for (i, (c, data)) in sent.into_iter().enumerate() {
            let r = chunk(d, n, c);
            buf[(i + 1) % n][r].copy_from_slice(&data);
        }
    }
    buf
}

/// `x ← x − (α/n) Σ_i g_i` on every replica.
pub fn ring_allreduce_round(states: &mut [Vec<f64>], gradients: &[Vec<f64>], alpha: f64) {
    let n = states.len() as f64;
    for (x, sum) in states.iter_mut().zip(ring_allreduce(gradients)) {
        for (xv, s) in x.iter_mut().zip(sum) {
            *xv -= alpha / n * s;
        }
    }
}

/// Synchronous decentralized SGD.
pub struct SyncDsgd {
    x: Vec<Vec<f64>>,
    w: MixingMatrix,
    alpha: f64,
    oracles: OracleSet<f64>,
    rngs: Vec<SimRng>,
    rounds: u64,
}

impl SyncDsgd {
    pub fn new(w: &MixingMatrix, alpha: f64, oracles: OracleSet<f64>, initial: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        check_initial(w.n(), oracles.len(), &initial)?;
        Ok(Self {
            rngs: (0..w.n()).map(|i| stream(seed, StreamDomain::GradientNoise, i as u64)).collect(),
            x: initial,
            w: w.clone(),
            alpha,
            oracles,
            rounds: 0,
        })
    }
}

impl RoundAlgorithm for SyncDsgd {
    fn n_agents(&self) -> usize {
        self.x.len()
    }

    fn exchange(&self) -> Exchange {
        Exchange::Neighbors
    }

    fn round(&mut self) -> Result<()> {
        let g: Vec<Vec<f64>> = (0..self.x.len())
            .map(|i| self.oracles[i].sample_gradient(&self.x[i], &mut self.rngs[i]))
            .collect();
        sync_dsgd_round(&mut self.x, &self.w, &g, self.alpha);
        self.rounds += 1;
        for (i, x) in self.x.iter().enumerate() {
            check_divergence(x, i, self.rounds, self.alpha, None)?;
        }
        Ok(())
    }

    fn iterate(&self, agent: usize) -> &[f64] {
        &self.x[agent]
    }
}

/// Data-parallel SGD with a ring all-reduce of the gradients.
pub struct ParallelSgd {
    x: Vec<Vec<f64>>,
    alpha: f64,
    oracles: OracleSet<f64>,
    rngs: Vec<SimRng>,
    rounds: u64,
}

impl ParallelSgd {
    pub fn new(alpha: f64, oracles: OracleSet<f64>, initial: Vec<f64>, seed: u64) -> Self {
        let n = oracles.len();
        Self {
            x: vec![initial; n],
            alpha,
            rngs: (0..n).map(|i| stream(seed, StreamDomain::GradientNoise, i as u64)).collect(),
            oracles,
            rounds: 0,
        }
    }
}

impl RoundAlgorithm for ParallelSgd {
    fn n_agents(&self) -> usize {
        self.x.len()
    }

    fn exchange(&self) -> Exchange {
        Exchange::RingAllReduce
    }

    fn round(&mut self) -> Result<()> {
        let g: Vec<Vec<f64>> = (0..self.x.len())
            .map(|i| self.oracles[i].sample_gradient(&self.x[i], &mut self.rngs[i]))
            .collect();
        ring_allreduce_round(&mut self.x, &g, self.alpha);
        self.rounds += 1;
        check_divergence(&self.x[0], 0, self.rounds, self.alpha, None)
    }

    fn iterate(&self, agent: usize) -> &[f64] {
        &self.x[agent]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, metropolis_weights, TopologyKind};
    use crate::rng::{stream, StreamDomain};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identity_mixing_is_independent_sgd() {
        let w = MixingMatrix::from_dense(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut x = vec![vec![1.0], vec![4.0]];
        sync_dsgd_round(&mut x, &w, &[vec![1.0], vec![2.0]], 0.5);
        assert_eq!(x, vec![vec![0.5], vec![3.0]]);
    }

    #[test]
    fn pure_gossip_conserves_mass() {
        let w = metropolis_weights(&build_topology(TopologyKind::Grid, 9).unwrap()).unwrap();
        let mut rng = stream(3, StreamDomain::Auxiliary, 0);
        let mut x: Vec<Vec<f64>> = (0..9).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let mass: f64 = x.iter().map(|v| v[0]).sum();
        for _ in 0..50 {
            sync_dsgd_round(&mut x, &w, &vec![vec![0.0]; 9], 0.1);
        }
        let after: f64 = x.iter().map(|v| v[0]).sum();
        assert!((mass - after).abs() < 1e-12);
    }

    #[test]
    fn two_agent_allreduce_is_minibatch_step() {
        let mut x = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        ring_allreduce_round(&mut x, &[vec![0.5, 1.0], vec![1.5, -1.0]], 0.2);
        assert_eq!(x[0], vec![1.0 - 0.1 * 2.0, 2.0]);
        assert_eq!(x[0], x[1]);
    }

    proptest! {
        #[test]
        fn allreduce_matches_serial_sum(n in 1usize..9, d in 1usize..20, seed in 0u64..1000) {
            let mut rng = stream(seed, StreamDomain::Auxiliary, 0);
            let g: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
            let out = ring_allreduce(&g);
            for k in 0..d {
                let serial: f64 = g.iter().map(|v| v[k]).sum();
                for copy in &out {
                    prop_assert!((copy[k] - serial).abs() <= 1e-12 * (1.0 + serial.abs()));
                    prop_assert_eq!(copy[k].to_bits(), out[0][k].to_bits());
                }
            }
        }
    }
}
