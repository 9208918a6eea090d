//! Block-structured objectives for coordinate descent.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::adsgd::neighborhoods;
use crate::error::{LabError, Result};
use crate::graph::MixingMatrix;
use crate::problems::{GradientOracle, LocalProblem, OracleSet};
use crate::rng::SimRng;
use crate::vector::{ModelVector, Scalar};

/// `𝐟(𝐱)` over blocks `𝐱 = (x_1, …, x_n)`.
pub trait BlockProblem: Send + Sync {
    fn block_dims(&self) -> Vec<usize>;
    fn loss(&self, x: &[Vec<f64>]) -> f64;
    fn block_gradient(&self, i: usize, x: &[Vec<f64>]) -> ModelVector;
    fn block_stochastic_gradient(&self, i: usize, x: &[Vec<f64>], rng: &mut SimRng) -> ModelVector;
    fn smoothness(&self) -> f64;
    fn lower_bound(&self) -> f64;
}

/// Block gradients in an arbitrary scalar field, evaluated on a full snapshot.
pub trait BlockGradientOracle<S: Scalar>: Send + Sync {
    fn n_blocks(&self) -> usize;
    fn block_gradient(&self, i: usize, snapshot: &[Vec<S>], rng: &mut SimRng) -> Vec<S>;
}

/// Stochastic (or exact) block gradients of an `f64` [`BlockProblem`].
pub struct BlockProblemOracle<P> {
    pub problem: Arc<P>,
    pub exact: bool,
}

impl<P: BlockProblem> BlockGradientOracle<f64> for BlockProblemOracle<P> {
    fn n_blocks(&self) -> usize {
        self.problem.block_dims().len()
    }

    fn block_gradient(&self, i: usize, snapshot: &[Vec<f64>], rng: &mut SimRng) -> Vec<f64> {
        if self.exact {
            self.problem.block_gradient(i, snapshot).into_vec()
        } else {
            self.problem.block_stochastic_gradient(i, snapshot, rng).into_vec()
        }
    }
}

/// `L_α(𝐱) = Σ_i f_i(x_i) + 𝐱ᵀ(I − W)𝐱 / (2α)`
pub struct PenalizedConsensus {
    locals: Vec<Arc<dyn LocalProblem>>,
    w: MixingMatrix,
    alpha: f64,
}

impl PenalizedConsensus {
    pub fn new(locals: Vec<Arc<dyn LocalProblem>>, w: MixingMatrix, alpha: f64) -> Result<Self> {
        if locals.len() != w.n() {
            return Err(LabError::Config("one local problem per agent required".into()));
        }
        if !(alpha > 0.0) {
            return Err(LabError::Config("penalty step α must be positive".into()));
        }
        Ok(Self { locals, w, alpha })
    }

    /// `L_L = L_F + (1 − λ_n(W)) / α`
    pub fn lagrangian_smoothness(l_f: f64, w: &MixingMatrix, alpha: f64) -> f64 {
        l_f + (1.0 - w.lambda_min()) / alpha
    }

    fn mixed(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64> {
        let mut m = vec![0.0; x[i].len()];
        for (j, xj) in x.iter().enumerate() {
            let wij = self.w.get(i, j);
            if wij != 0.0 {
                for (o, v) in m.iter_mut().zip(xj) {
                    *o += wij * v;
                }
            }
        }
        m
    }

    fn penalty_gradient(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64> {
        let m = self.mixed(i, x);
        x[i].iter().zip(m).map(|(a, b)| (a - b) / self.alpha).collect()
    }

    /// Oracle with the same association order as the buffered ADSGD kernel.
    pub fn oracle<S: Scalar>(w: &MixingMatrix, alpha: f64, locals: OracleSet<S>) -> PenalizedConsensusOracle<S> {
        let nbhd = neighborhoods(w);
        let weights = nbhd
            .iter()
            .enumerate()
            .map(|(i, js)| js.iter().map(|&j| S::from_f64_exact(w.get(i, j))).collect())
            .collect();
        PenalizedConsensusOracle {
            locals,
            neighborhoods: nbhd,
            weights,
            alpha: S::from_f64_exact(alpha),
        }
    }
}

impl BlockProblem for PenalizedConsensus {
    fn block_dims(&self) -> Vec<usize> {
        self.locals.iter().map(|p| p.dim()).collect()
    }

    fn loss(&self, x: &[Vec<f64>]) -> f64 {
        let f: f64 = self.locals.iter().zip(x).map(|(p, xi)| p.loss(xi)).sum();
        let quad: f64 = (0..x.len())
            .map(|i| {
                let m = self.mixed(i, x);
                x[i].iter().zip(m).map(|(a, b)| a * (a - b)).sum::<f64>()
            })
            .sum();
        f + quad / (2.0 * self.alpha)
    }

    fn block_gradient(&self, i: usize, x: &[Vec<f64>]) -> ModelVector {
        let mut g = self.locals[i].full_gradient(&x[i]);
        g.axpy(1.0, &ModelVector::from_vec(self.penalty_gradient(i, x)));
        g
    }

    fn block_stochastic_gradient(&self, i: usize, x: &[Vec<f64>], rng: &mut SimRng) -> ModelVector {
        let mut g = self.locals[i].stochastic_gradient(&x[i], rng);
        g.axpy(1.0, &ModelVector::from_vec(self.penalty_gradient(i, x)));
        g
    }

    fn smoothness(&self) -> f64 {
        let l_f = self.locals.iter().map(|p| p.smoothness()).fold(0.0, f64::max);
        Self::lagrangian_smoothness(l_f, &self.w, self.alpha)
    }

    fn lower_bound(&self) -> f64 {
        self.locals.iter().map(|p| p.lower_bound()).sum()
    }
}

/// Block gradient `g_i(x_i) + (x_i − Σ_{j∈N̄_i} w_ij x̂_j) / α` of `L_α`.
pub struct PenalizedConsensusOracle<S: Scalar> {
    locals: OracleSet<S>,
    neighborhoods: Vec<Vec<usize>>,
    weights: Vec<Vec<S>>,
    alpha: S,
}

impl<S: Scalar> BlockGradientOracle<S> for PenalizedConsensusOracle<S> {
    fn n_blocks(&self) -> usize {
        self.locals.len()
    }

    fn block_gradient(&self, i: usize, snapshot: &[Vec<S>], rng: &mut SimRng) -> Vec<S> {
        let xi = &snapshot[i];
        let g = self.locals[i].sample_gradient(xi, rng);
        let mut m = vec![S::zero(); xi.len()];
        for (&j, w) in self.neighborhoods[i].iter().zip(&self.weights[i]) {
            for (o, v) in m.iter_mut().zip(&snapshot[j]) {
                *o = o.clone() + w.clone() * v.clone();
            }
        }
        g.into_iter()
            .zip(xi.iter().zip(m))
            .map(|(gk, (x, mk))| gk + (x.clone() - mk) / self.alpha.clone())
            .collect()
    }
}

/// `½ 𝐱ᵀQ𝐱 − cᵀ𝐱` with `Q` symmetric positive definite and a block partition
/// of the coordinates.
#[derive(Clone, Debug)]
pub struct BlockQuadratic {
    q: DMatrix<f64>,
    c: DVector<f64>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    smoothness: f64,
    minimum: f64,
}

impl BlockQuadratic {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().sum();
        if q.nrows() != d || q.ncols() != d || c.len() != d || dims.contains(&0) {
            return Err(LabError::Problem("block quadratic dimensions are inconsistent".into()));
        }
        if (&q - q.transpose()).amax() > 0.0 {
            return Err(LabError::Problem("block quadratic matrix must be symmetric".into()));
        }
        let eig = q.clone().symmetric_eigen().eigenvalues;
        if eig.min() <= 0.0 {
            return Err(LabError::Problem("block quadratic matrix must be positive definite".into()));
        }
        let xstar = q
            .clone()
            .cholesky()
            .ok_or_else(|| LabError::Problem("Cholesky factorization failed".into()))?
            .solve(&c);
        let minimum = -0.5 * c.dot(&xstar);
        let mut offsets = vec![0];
        for w in &dims {
            offsets.push(offsets.last().unwrap() + w);
        }
        Ok(Self {
            q,
            c,
            dims,
            offsets,
            smoothness: eig.max(),
            minimum,
        })
    }

    fn flat(&self, x: &[Vec<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.offsets[self.dims.len()], x.iter().flatten().cloned())
    }
}

impl BlockProblem for BlockQuadratic {
    fn block_dims(&self) -> Vec<usize> {
        self.dims.clone()
    }

    fn loss(&self, x: &[Vec<f64>]) -> f64 {
        let v = self.flat(x);
        0.5 * v.dot(&(&self.q * &v)) - self.c.dot(&v)
    }

    fn block_gradient(&self, i: usize, x: &[Vec<f64>]) -> ModelVector {
        let v = self.flat(x);
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        let rows = self.q.rows(a, b - a);
        let g = rows * v - self.c.rows(a, b - a);
        ModelVector::from_vec(g.iter().cloned().collect())
    }

    fn block_stochastic_gradient(&self, i: usize, x: &[Vec<f64>], _rng: &mut SimRng) -> ModelVector {
        self.block_gradient(i, x)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn lower_bound(&self) -> f64 {
        self.minimum
    }
}

/// Wraps a single [`GradientOracle`] as a one-block problem.
pub struct SingleBlock<S: Scalar>(pub Arc<dyn GradientOracle<S>>);

impl<S: Scalar> BlockGradientOracle<S> for SingleBlock<S> {
    fn n_blocks(&self) -> usize {
        1
    }

    fn block_gradient(&self, _i: usize, snapshot: &[Vec<S>], rng: &mut SimRng) -> Vec<S> {
        self.0.sample_gradient(&snapshot[0], rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, metropolis_weights, TopologyKind};
    use crate::problems::{exact_oracles, make_quadratic};
    use crate::rng::{stream, StreamDomain};
    use rand::Rng;

    fn fd_check(p: &dyn BlockProblem, x: &[Vec<f64>]) {
        let h = 1e-5;
        for i in 0..x.len() {
            let g = p.block_gradient(i, x);
            for k in 0..x[i].len() {
                let mut up = x.to_vec();
                let mut dn = x.to_vec();
                up[i][k] += h;
                dn[i][k] -= h;
                let fd = (p.loss(&up) - p.loss(&dn)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + fd.abs()), "block {i} coord {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn penalized_consensus_gradient_matches_finite_differences() {
        let topo = build_topology(TopologyKind::Ring, 4).unwrap();
        let w = metropolis_weights(&topo).unwrap();
        let locals: Vec<Arc<dyn LocalProblem>> = make_quadratic(4, 3, 9, 5.0)
            .unwrap()
            .into_iter()
            .map(|p| p as Arc<dyn LocalProblem>)
            .collect();
        let p = PenalizedConsensus::new(locals.clone(), w.clone(), 0.3).unwrap();
        let mut rng = stream(1, StreamDomain::Auxiliary, 0);
        let x: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        fd_check(&p, &x);
        let o = PenalizedConsensus::oracle(&w, 0.3, exact_oracles(&locals));
        for i in 0..4 {
            let a = o.block_gradient(i, &x, &mut rng);
            let b = p.block_gradient(i, &x);
            for (u, v) in a.iter().zip(b.as_slice()) {
                assert!((u - v).abs() < 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn block_quadratic_gradient_matches_finite_differences() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let p = BlockQuadratic::new(q, c, vec![2, 1]).unwrap();
        fd_check(&p, &[vec![0.3, -0.7], vec![1.2]]);
        assert!(p.loss(&[vec![0.0, 0.0], vec![0.0]]) >= p.lower_bound());
    }
}
