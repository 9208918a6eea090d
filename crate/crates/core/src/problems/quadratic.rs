use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use rand::Rng;

use super::{bounded_normal, GradientOracle, LocalProblem};
use crate::error::{LabError, Result};
use crate::rng::{stream, SimRng, StreamDomain};
use crate::vector::{ModelVector, Scalar};

/// `f_i(x) = ½‖A x − b‖²` with additive bounded noise on the gradient.
#[derive(Debug)]
pub struct QuadraticProblem {
    agent_id: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    noise_sigma2: f64,
    smoothness: f64,
    lower_bound: f64,
    minimizer: ModelVector,
    exact: OnceLock<(Vec<Vec<BigRational>>, Vec<BigRational>)>,
}

impl QuadraticProblem {
    pub fn new(agent_id: usize, a: DMatrix<f64>, b: DVector<f64>, noise_sigma2: f64) -> Result<Self> {
        if a.ncols() == 0 || a.nrows() == 0 {
            return Err(LabError::Problem("quadratic needs d ≥ 1".into()));
        }
        if a.nrows() != b.len() {
            return Err(LabError::Problem(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if !(noise_sigma2 >= 0.0) {
            return Err(LabError::Problem("noise variance must be ≥ 0".into()));
        }
        let ata = a.transpose() * &a;
        let eig = ata.clone().symmetric_eigen();
        let smoothness = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let svd = a.clone().svd(true, true);
        let minimizer = svd
            .solve(&b, 1e-14)
            .map_err(|e| LabError::Problem(format!("least-squares solve failed: {e}")))?;
        let residual = &a * &minimizer - &b;
        let lower_bound = 0.5 * residual.norm_squared();
        Ok(Self {
            agent_id,
            a,
            b,
            noise_sigma2,
            smoothness,
            lower_bound,
            minimizer: ModelVector::from_vec(minimizer.iter().cloned().collect()),
            exact: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn minimizer(&self) -> &ModelVector {
        &self.minimizer
    }

    pub fn noise_sigma2(&self) -> f64 {
        self.noise_sigma2
    }

    fn noise_scale(&self) -> f64 {
        (self.noise_sigma2 / self.a.ncols() as f64).sqrt()
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        let xv = DVector::from_column_slice(x);
        &self.a * xv - &self.b
    }

    fn exact_coefficients(&self) -> &(Vec<Vec<BigRational>>, Vec<BigRational>) {
        self.exact.get_or_init(|| {
            let a = (0..self.a.nrows())
                .map(|r| (0..self.a.ncols()).map(|c| BigRational::from_f64_exact(self.a[(r, c)])).collect())
                .collect();
            let b = self.b.iter().map(|v| BigRational::from_f64_exact(*v)).collect();
            (a, b)
        })
    }
}

impl LocalProblem for QuadraticProblem {
    fn agent_id(&self) -> usize {
        self.agent_id
    }

    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    fn full_gradient(&self, x: &[f64]) -> ModelVector {
        let g = self.a.tr_mul(&self.residual(x));
        ModelVector::from_vec(g.iter().cloned().collect())
    }

    fn stochastic_gradient(&self, x: &[f64], rng: &mut SimRng) -> ModelVector {
        let mut g = self.full_gradient(x);
        if self.noise_sigma2 > 0.0 {
            let s = self.noise_scale();
            for v in g.as_mut_slice() {
                *v += s * bounded_normal(rng);
            }
        }
        g
    }

    fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn variance_bound(&self) -> f64 {
        self.noise_sigma2
    }
}

impl GradientOracle<BigRational> for QuadraticProblem {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Exact `Aᵀ(Ax − b)` plus the same noise draws as the `f64` path.
    fn sample_gradient(&self, x: &[BigRational], rng: &mut SimRng) -> Vec<BigRational> {
        let (a, b) = self.exact_coefficients();
        let rows = a.len();
        let cols = x.len();
        let residual: Vec<BigRational> = (0..rows)
            .map(|r| {
                let mut acc = -b[r].clone();
                for c in 0..cols {
                    acc += a[r][c].clone() * x[c].clone();
                }
                acc
            })
            .collect();
        let mut g: Vec<BigRational> = (0..cols)
            .map(|c| {
                let mut acc = BigRational::from_f64_exact(0.0);
                for r in 0..rows {
                    acc += a[r][c].clone() * residual[r].clone();
                }
                acc
            })
            .collect();
        if self.noise_sigma2 > 0.0 {
            let s = self.noise_scale();
            for v in &mut g {
                *v += BigRational::from_f64_exact(s * bounded_normal(rng));
            }
        }
        g
    }
}

/// Generator parameters for a family of quadratic agents.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSpec {
    pub n_agents: usize,
    pub dim: usize,
    pub seed: u64,
    /// Upper end of the spectrum of `A_iᵀA_i`; the lower end is 1.
    pub condition: f64,
    pub noise_sigma2: f64,
    /// Spread of the local minimizers around a shared point. Zero makes all
    /// agents share one minimizer, so exact consensus at the optimum exists.
    pub minimizer_spread: f64,
}

impl QuadraticSpec {
    pub fn new(n_agents: usize, dim: usize, seed: u64, condition: f64) -> Self {
        Self {
            n_agents,
            dim,
            seed,
            condition,
            noise_sigma2: 0.0,
            minimizer_spread: 1.0,
        }
    }
}

pub fn make_quadratic(n: usize, d: usize, seed: u64, condition: f64) -> Result<Vec<Arc<QuadraticProblem>>> {
    make_quadratic_with(&QuadraticSpec::new(n, d, seed, condition))
}

/// Builds `A_i = Q_i diag(√λ) Q_iᵀ` with `λ` spread over `[1, condition]`
/// (both endpoints attained when `d ≥ 2`) and `b_i = A_i x_i*`.
pub fn make_quadratic_with(spec: &QuadraticSpec) -> Result<Vec<Arc<QuadraticProblem>>> {
    if spec.n_agents == 0 {
        return Err(LabError::Problem("need at least one agent".into()));
    }
    if spec.dim == 0 {
        return Err(LabError::Problem("quadratic needs d ≥ 1".into()));
    }
    if !(spec.condition >= 1.0) || !spec.condition.is_finite() {
        return Err(LabError::Problem(format!(
            "condition must be ≥ 1, got {}",
            spec.condition
        )));
    }
    let d = spec.dim;
    let mut shared_rng = stream(spec.seed, StreamDomain::Problem, u64::MAX >> 16);
    let center: Vec<f64> = (0..d).map(|_| shared_rng.gen_range(-1.0..1.0)).collect();
    (0..spec.n_agents)
        .map(|i| {
            let mut rng = stream(spec.seed, StreamDomain::Problem, i as u64);
            let gauss = DMatrix::from_fn(d, d, |_, _| bounded_normal(&mut rng));
            let q = gauss.qr().q();
            let mut eig: Vec<f64> = (0..d)
                .map(|k| {
                    if d == 1 {
                        1.0
                    } else if k == 0 {
                        1.0
                    } else if k == d - 1 {
                        spec.condition
                    } else {
                        rng.gen_range(1.0..=spec.condition)
                    }
                })
                .collect();
            if d == 1 {
                eig[0] = spec.condition;
            }
            let sqrt_diag = DMatrix::from_diagonal(&DVector::from_iterator(d, eig.iter().map(|v| v.sqrt())));
            let a = &q * sqrt_diag * q.transpose();
            let xstar = DVector::from_iterator(
                d,
                center
                    .iter()
                    .map(|c| c + spec.minimizer_spread * bounded_normal(&mut rng)),
            );
            let b = &a * xstar;
            QuadraticProblem::new(i, a, b, spec.noise_sigma2).map(Arc::new)
        })
        .collect()
}
