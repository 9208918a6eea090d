//! Local objectives, their gradients, datasets and partitioning.

mod dataset;
mod logreg;
mod partition;
mod quadratic;
mod smoothness;

use std::fmt::Debug;
use std::sync::Arc;

pub use dataset::{read_csv, read_idx_pair, synthetic_blobs, Dataset, TargetRule};
pub use logreg::{make_nonconvex_logreg, LogisticProblem};
pub use partition::{partition_dataset, PartitionSpec};
pub use quadratic::{make_quadratic, make_quadratic_with, QuadraticProblem, QuadraticSpec};
pub use smoothness::estimate_smoothness;

use crate::rng::SimRng;
use crate::vector::{ModelVector, Scalar};

/// Agent-local objective `f_i` with its exact and stochastic gradients.
pub trait LocalProblem: Debug + Send + Sync {
    fn agent_id(&self) -> usize;
    fn dim(&self) -> usize;
    fn loss(&self, x: &[f64]) -> f64;
    fn full_gradient(&self, x: &[f64]) -> ModelVector;
    fn stochastic_gradient(&self, x: &[f64], rng: &mut SimRng) -> ModelVector;
    /// `f_i*`
    fn lower_bound(&self) -> f64;
    /// `L_i`
    fn smoothness(&self) -> f64;
    /// Upper bound on `E‖g − ∇f_i‖²`.
    fn variance_bound(&self) -> f64;
}

/// Source of stochastic gradients in an arbitrary scalar field.
///
/// Every `f64` [`LocalProblem`] is an oracle through [`ProblemOracle`]; the
/// quadratic problem also evaluates exactly over rationals.
pub trait GradientOracle<S: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn sample_gradient(&self, x: &[S], rng: &mut SimRng) -> Vec<S>;
}

#[derive(Clone, Debug)]
pub struct ProblemOracle(pub Arc<dyn LocalProblem>);

impl GradientOracle<f64> for ProblemOracle {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn sample_gradient(&self, x: &[f64], rng: &mut SimRng) -> Vec<f64> {
        self.0.stochastic_gradient(x, rng).into_vec()
    }
}

/// Oracle returning exact gradients regardless of the problem's noise model.
#[derive(Clone, Debug)]
pub struct ExactOracle(pub Arc<dyn LocalProblem>);

impl GradientOracle<f64> for ExactOracle {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn sample_gradient(&self, x: &[f64], _rng: &mut SimRng) -> Vec<f64> {
        self.0.full_gradient(x).into_vec()
    }
}

pub type OracleSet<S> = Vec<Arc<dyn GradientOracle<S>>>;

pub fn stochastic_oracles(problems: &[Arc<dyn LocalProblem>]) -> OracleSet<f64> {
    problems
        .iter()
        .map(|p| Arc::new(ProblemOracle(p.clone())) as Arc<dyn GradientOracle<f64>>)
        .collect()
}

pub fn exact_oracles(problems: &[Arc<dyn LocalProblem>]) -> OracleSet<f64> {
    problems
        .iter()
        .map(|p| Arc::new(ExactOracle(p.clone())) as Arc<dyn GradientOracle<f64>>)
        .collect()
}

/// The network objective `f(x) = Σ_i f_i(x)`.
#[derive(Clone, Debug)]
pub struct GlobalObjective {
    problems: Vec<Arc<dyn LocalProblem>>,
}

impl GlobalObjective {
    pub fn new(problems: Vec<Arc<dyn LocalProblem>>) -> Self {
        Self { problems }
    }

    pub fn problems(&self) -> &[Arc<dyn LocalProblem>] {
        &self.problems
    }

    pub fn n_agents(&self) -> usize {
        self.problems.len()
    }

    pub fn dim(&self) -> usize {
        self.problems.first().map_or(0, |p| p.dim())
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        self.problems.iter().map(|p| p.loss(x)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> ModelVector {
        let mut g = ModelVector::zeros(self.dim());
        for p in &self.problems {
            g.axpy(1.0, &p.full_gradient(x));
        }
        g
    }

    /// `L_F = max_i L_i`
    pub fn max_smoothness(&self) -> f64 {
        self.problems.iter().map(|p| p.smoothness()).fold(0.0, f64::max)
    }

    pub fn max_variance(&self) -> f64 {
        self.problems.iter().map(|p| p.variance_bound()).fold(0.0, f64::max)
    }

    /// `Σ_i (f_i(x) − f_i*)`
    pub fn suboptimality_gap(&self, x: &[f64]) -> f64 {
        self.problems.iter().map(|p| p.loss(x) - p.lower_bound()).sum()
    }
}

/// Irwin–Hall approximation of a standard normal: bounded in `[-6, 6]`,
/// zero mean, unit variance, fixed consumption of 12 uniforms per draw.
pub(crate) fn bounded_normal(rng: &mut SimRng) -> f64 {
    use rand::Rng;
    let mut s = 0.0;
    for _ in 0..12 {
        s += rng.gen::<f64>();
    }
    s - 6.0
}
