use super::kernels::{adsgd_update, check_divergence, double_step_direct, double_step_update, AgentState};
use crate::error::{LabError, Result};
use crate::graph::{double_step_transform, MixingMatrix};
use crate::problems::OracleSet;
use crate::rng::{stream, SimRng, StreamDomain};
use crate::sim::AsyncAlgorithm;
use crate::vector::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Rule {
    Plain,
    DoubleStep,
    /// `(1 − β/α) x_i + (β/α)[W x̂]_i − β g` with the original rows.
    Blended,
}

/// Buffered asynchronous decentralized SGD. With the double-step rule the
/// agent mixes with `W̃` and steps with `β`.
pub struct Adsgd<S: Scalar> {
    agents: Vec<AgentState<S>>,
    rows: Vec<Vec<S>>,
    step: S,
    oracles: OracleSet<S>,
    rngs: Vec<SimRng>,
    rule: Rule,
    alpha: f64,
    alpha_s: S,
    beta: Option<f64>,
}

/// Rows of `w` restricted to each closed neighborhood, ascending.
pub(crate) fn neighborhoods(w: &MixingMatrix) -> Vec<Vec<usize>> {
    let n = w.n();
    (0..n)
        .map(|i| (0..n).filter(|&j| j == i || w.get(i, j) > 0.0).collect())
        .collect()
}

pub(crate) fn restricted_rows<S: Scalar>(w: &MixingMatrix, nbhd: &[Vec<usize>]) -> Vec<Vec<S>> {
    nbhd.iter()
        .enumerate()
        .map(|(i, js)| js.iter().map(|&j| S::from_f64_exact(w.get(i, j))).collect())
        .collect()
}

pub(crate) fn check_initial<S: Scalar>(n: usize, oracles_len: usize, initial: &[Vec<S>]) -> Result<()> {
    if oracles_len != n || initial.len() != n {
        return Err(LabError::Config(format!(
            "expected {n} oracles and initial models, got {oracles_len} and {}",
            initial.len()
        )));
    }
    let d = initial.first().map_or(0, |x| x.len());
    if initial.iter().any(|x| x.len() != d) {
        return Err(LabError::Config("initial models differ in dimension".into()));
    }
    Ok(())
}

impl<S: Scalar> Adsgd<S> {
    fn build(w: &MixingMatrix, step: f64, oracles: OracleSet<S>, initial: Vec<Vec<S>>, seed: u64, rule: Rule, alpha: f64, beta: Option<f64>) -> Result<Self> {
        let n = w.n();
        check_initial(n, oracles.len(), &initial)?;
        let nbhd = neighborhoods(w);
        let rows = restricted_rows(w, &nbhd);
        let agents = nbhd
            .into_iter()
            .enumerate()
            .map(|(i, js)| AgentState::new(i, js, &initial))
            .collect();
        Ok(Self {
            agents,
            rows,
            step: S::from_f64_exact(step),
            oracles,
            rngs: (0..n).map(|i| stream(seed, StreamDomain::GradientNoise, i as u64)).collect(),
            rule,
            alpha,
            alpha_s: S::from_f64_exact(alpha),
            beta,
        })
    }

    pub fn new(w: &MixingMatrix, alpha: f64, oracles: OracleSet<S>, initial: Vec<Vec<S>>, seed: u64) -> Result<Self> {
        Self::build(w, alpha, oracles, initial, seed, Rule::Plain, alpha, None)
    }

    /// Double-step-size variant in blended form: mixes with `w` itself and
    /// shrinks toward the agent's own model.
    pub fn double_step_blended(w: &MixingMatrix, alpha: f64, beta: f64, oracles: OracleSet<S>, initial: Vec<Vec<S>>, seed: u64) -> Result<Self> {
        double_step_transform(w, alpha, beta)?;
        Self::build(w, beta, oracles, initial, seed, Rule::Blended, alpha, Some(beta))
    }

    /// Double-step-size variant: mixes with `double_step_transform(w, α, β)` and steps with `β`.
    pub fn double_step(w: &MixingMatrix, alpha: f64, beta: f64, oracles: OracleSet<S>, initial: Vec<Vec<S>>, seed: u64) -> Result<Self> {
        let w_tilde = double_step_transform(w, alpha, beta)?;
        Self::build(&w_tilde, beta, oracles, initial, seed, Rule::DoubleStep, alpha, Some(beta))
    }

    pub fn agent(&self, i: usize) -> &AgentState<S> {
        &self.agents[i]
    }

    pub fn models(&self) -> Vec<&[S]> {
        self.agents.iter().map(|a| a.x.as_slice()).collect()
    }
}

impl<S: Scalar> AsyncAlgorithm for Adsgd<S> {
    type Scalar = S;
    type Message = Vec<S>;

    fn n_agents(&self) -> usize {
        self.agents.len()
    }

    fn initial_message(&self, agent: usize) -> Vec<S> {
        self.agents[agent].x.clone()
    }

    fn on_compute_start(&mut self, agent: usize) {
        let a = &mut self.agents[agent];
        a.pending_gradient = Some(self.oracles[agent].sample_gradient(&a.x, &mut self.rngs[agent]));
    }

    fn on_compute_done(&mut self, agent: usize) -> Result<Vec<S>> {
        let a = &mut self.agents[agent];
        let g = a
            .pending_gradient
            .take()
            .ok_or_else(|| LabError::Trace(format!("agent {agent} committed without a gradient")))?;
        let next = match self.rule {
            Rule::Plain => adsgd_update(a, &self.rows[agent], &self.step, &g),
            Rule::DoubleStep => double_step_update(a, &self.rows[agent], &self.step, &g),
            Rule::Blended => double_step_direct(a, &self.rows[agent], &self.alpha_s, &self.step, &g),
        };
        a.update_count += 1;
        check_divergence(&next, agent, a.update_count, self.alpha, self.beta)?;
        a.x = next;
        Ok(a.x.clone())
    }

    fn on_arrival(&mut self, src: usize, dst: usize, _version: u64, msg: Vec<S>) {
        let a = &mut self.agents[dst];
        if let Some(slot) = a.slot(src) {
            a.buffer[slot] = msg;
        }
    }

    fn coalesce(&self, pending: &mut Vec<S>, newer: Vec<S>) {
        *pending = newer;
    }

    fn iterate(&self, agent: usize) -> &[S] {
        &self.agents[agent].x
    }
}
