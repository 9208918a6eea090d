use rand::Rng;

use super::{bounded_normal, LocalProblem};
use crate::error::{LabError, Result};
use crate::rng::SimRng;

/// Empirical Lipschitz estimate of `∇f`: the largest ratio
/// `‖∇f(x) − ∇f(y)‖ / ‖x − y‖` over `trials` random pairs. Only used to pick
/// step sizes, never as a certificate.
///
/// Each trial consumes a fixed amount of randomness, so runs with more trials
/// extend the sample set of runs with fewer (nested sampling).
pub fn estimate_smoothness(problem: &dyn LocalProblem, trials: usize, rng: &mut SimRng) -> Result<f64> {
    if trials == 0 {
        return Err(LabError::Problem("smoothness estimate needs ≥ 1 trial".into()));
    }
    let d = problem.dim();
    let mut best = 0.0f64;
    for _ in 0..trials {
        let x: Vec<f64> = (0..d).map(|_| bounded_normal(rng)).collect();
        let dir: Vec<f64> = (0..d).map(|_| bounded_normal(rng)).collect();
        let radius = 10f64.powf(rng.gen_range(-3.0..0.0));
        let dir_norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dir_norm == 0.0 {
            continue;
        }
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + radius * u / dir_norm).collect();
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        let gx = problem.full_gradient(&x);
        let gy = problem.full_gradient(&y);
        best = best.max(gx.sub(&gy).norm() / dist);
    }
    Ok(best)
}
