//! Dense model vectors and the scalar abstraction shared by the update kernels.
//!
//! The simulator itself always runs in `f64`. The update kernels and agent
//! state machines are generic over [`Scalar`] so that a recorded schedule can
//! be replayed in exact rational arithmetic, which is how algebraic
//! equivalences between update rules are checked without rounding noise.

use std::fmt::Debug;
use std::ops::{Index, IndexMut, Neg};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Field element used by the update kernels.
pub trait Scalar: Num + Neg<Output = Self> + Clone + Debug + PartialEq + Send + Sync {
    fn from_f64_exact(v: f64) -> Self;
    fn to_f64_lossy(&self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64_exact(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_f64_exact(v: f64) -> Self {
        BigRational::from_f64(v).unwrap_or_else(|| panic!("non-finite value {v} has no rational form"))
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Convenience constructor for exact rationals in tests and fixtures.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `out[k] += a * x[k]`, evaluated left to right.
#[inline]
pub fn axpy<S: Scalar>(out: &mut [S], a: &S, x: &[S]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, xi) in out.iter_mut().zip(x) {
        *o = o.clone() + a.clone() * xi.clone();
    }
}

pub fn scaled<S: Scalar>(a: &S, x: &[S]) -> Vec<S> {
    x.iter().map(|xi| a.clone() * xi.clone()).collect()
}

pub fn norm_sq_f64<S: Scalar>(x: &[S]) -> f64 {
    x.iter()
        .map(|v| {
            let f = v.to_f64_lossy();
            f * f
        })
        .sum()
}

/// Dense real vector of fixed dimension; the unit of model state, message
/// payload and gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn axpy(&mut self, a: f64, x: &ModelVector) {
        axpy(&mut self.0, &a, &x.0);
    }

    pub fn scale(&mut self, a: f64) {
        self.0.iter_mut().for_each(|v| *v *= a);
    }

    pub fn sub(&self, other: &ModelVector) -> ModelVector {
        ModelVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &ModelVector) -> ModelVector {
        ModelVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for ModelVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for ModelVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ModelVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}
