use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub fn c0(b: f64, d: f64) -> f64 {
    d * d + 3.0 * b * b * (d + 2.0 * d.powi(3))
}

pub fn c1(b: f64, d: f64) -> f64 {
    6.0 * b * b * d * d + 3.0 * b * b + 3.0 * b * d + 3.0 * b + d
}

/// Undefined for `D = 0`.
pub fn c2(b: f64, d: f64) -> Option<f64> {
    (d > 0.0).then(|| 6.0 * b * b * d + 3.0 * b * b / d + 1.0)
}

/// Largest admissible step for a smoothness constant `l`: `1/((D+½)L)`.
pub fn step_limit(d: f64, l: f64) -> f64 {
    1.0 / ((d + 0.5) * l)
}

/// Block-coordinate rate for step `alpha`; `None` outside the admissible range.
#[allow(clippy::too_many_arguments)]
pub fn lemma1_rhs(b: f64, d: f64, l: f64, n: f64, alpha: f64, k: f64, sigma2: f64, f_gap: f64) -> Option<f64> {
    if !(alpha > 0.0 && alpha < step_limit(d, l)) {
        return None;
    }
    let c0 = c0(b, d);
    let margin = 1.0 - (d + 0.5) * l * alpha;
    let opt = 3.0 * n * (b + c0 * l * l * alpha * alpha) / (alpha * margin) * f_gap / k;
    let noise = alpha * (3.0 * n * c0 * l * l * alpha + l * (d + 1.0) / (2.0 * margin)) * sigma2;
    Some(opt + noise)
}

pub fn corollary2_step(d: f64, l: f64, k: f64) -> f64 {
    1.0 / (2.0 * (d + 0.5) * l * k.sqrt())
}

pub fn corollary2_rhs(b: f64, d: f64, l: f64, n: f64, k: f64, sigma2: f64, f_gap: f64) -> Option<f64> {
    let c2 = c2(b, d)?;
    Some(n * l * c1(b, d) * f_gap / k.sqrt() + (1.0 / k.sqrt() + 3.0 * n * c2 / (4.0 * k)) * sigma2)
}

/// `L_L = L_F + (1 − λ_min(W))/α`
pub fn lagrangian_smoothness(l_f: f64, lambda_min: f64, alpha: f64) -> f64 {
    l_f + (1.0 - lambda_min) / alpha
}

/// Decentralized rate for penalty `alpha` and step `beta`; `None` outside the
/// admissible range.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_rhs(
    b: f64,
    d: f64,
    l_f: f64,
    lambda2: f64,
    lambda_min: f64,
    n: f64,
    alpha: f64,
    beta: f64,
    k: f64,
    sigma2: f64,
    f_gap: f64,
) -> Option<f64> {
    let l_l = lagrangian_smoothness(l_f, lambda_min, alpha);
    if !(alpha > 0.0 && beta > 0.0 && beta < step_limit(d, l_l) && lambda2 < 1.0) {
        return None;
    }
    let c0 = c0(b, d);
    let margin = 1.0 - (d + 0.5) * l_l * beta;
    let opt = 6.0 * n * n * (b + c0 * l_l * l_l * beta * beta) / (beta * margin) * f_gap / k;
    let noise = l_l * beta * (6.0 * n * n * c0 * l_l * beta + n * (d + 1.0) / margin) * sigma2;
    let consensus = 4.0 * n * l_f * l_f * alpha / (1.0 - lambda2)
        * (f_gap + (d + 1.0) / 2.0 * k * l_l * beta * beta * sigma2);
    Some(opt + noise + consensus)
}

/// `(α, β) = (2/(L_F K^{1/3}), 1/(4 L_F (D+½) K^{2/3}))`
pub fn corollary1_steps(d: f64, l_f: f64, k: f64) -> (f64, f64) {
    let k3 = k.cbrt();
    (2.0 / (l_f * k3), 1.0 / (4.0 * l_f * (d + 0.5) * k3 * k3))
}

pub fn corollary1_rhs(b: f64, d: f64, l_f: f64, lambda2: f64, n: f64, k: f64, sigma2: f64, f_gap: f64) -> Option<f64> {
    if d <= 0.0 || lambda2 >= 1.0 {
        return None;
    }
    let k3 = k.cbrt();
    let gap = 1.0 - lambda2;
    Some(
        (16.0 * n * n * c1(b, d) + 8.0 * n / gap) * l_f * f_gap / k3
            + (n / (d * gap) + 2.0 * n) * sigma2 / k3
            + 3.0 * n * n * c0(b, d) / (2.0 * d) * sigma2 / (k3 * k3),
    )
}

/// Inputs to the bound evaluators. `alpha`/`beta` default to the corollary
/// step sizes when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    #[serde(rename = "B")]
    pub b: u64,
    #[serde(rename = "D")]
    pub d: u64,
    pub l_f: f64,
    pub n: usize,
    pub k: u64,
    pub sigma2: f64,
    pub f_gap: f64,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub lambda_min: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub c0: f64,
    pub c1: f64,
    pub c2: Option<f64>,
    pub block_alpha: f64,
    pub block_step_limit: f64,
    pub block_rate: Option<f64>,
    pub block_admissible: bool,
    pub corollary2_alpha: f64,
    pub corollary2_rate: Option<f64>,
    pub decentralized_alpha: Option<f64>,
    pub decentralized_beta: Option<f64>,
    pub lagrangian_smoothness: Option<f64>,
    pub decentralized_step_limit: Option<f64>,
    pub decentralized_rate: Option<f64>,
    pub decentralized_admissible: bool,
    pub corollary1_alpha: f64,
    pub corollary1_beta: f64,
    pub corollary1_rate: Option<f64>,
}

pub fn evaluate_bounds(p: &BoundParams) -> Result<BoundReport> {
    if p.b == 0 || p.n == 0 || p.k == 0 || !(p.l_f > 0.0) || p.sigma2 < 0.0 || p.f_gap < 0.0 {
        return Err(LabError::Config("bound parameters need B, n, K ≥ 1, L_F > 0, σ² ≥ 0, f_gap ≥ 0".into()));
    }
    let (b, d, l, n, k) = (p.b as f64, p.d as f64, p.l_f, p.n as f64, p.k as f64);
    let cor2_alpha = corollary2_step(d, l, k);
    let block_alpha = p.alpha.unwrap_or(cor2_alpha);
    let block_rate = lemma1_rhs(b, d, l, n, block_alpha, k, p.sigma2, p.f_gap);
    let (cor1_alpha, cor1_beta) = corollary1_steps(d, l, k);

    let spectral = p.lambda2.zip(p.lambda_min);
    let (dec_alpha, dec_beta, l_l, dec_rate) = match spectral {
        Some((l2, lmin)) => {
            let a = p.alpha.unwrap_or(cor1_alpha);
            let bt = p.beta.unwrap_or(cor1_beta);
            let l_l = lagrangian_smoothness(l, lmin, a);
            (Some(a), Some(bt), Some(l_l), theorem1_rhs(b, d, l, l2, lmin, n, a, bt, k, p.sigma2, p.f_gap))
        }
        None => (None, None, None, None),
    };
    Ok(BoundReport {
        c0: c0(b, d),
        c1: c1(b, d),
        c2: c2(b, d),
        block_alpha,
        block_step_limit: step_limit(d, l),
        block_admissible: block_rate.is_some(),
        block_rate,
        corollary2_alpha: cor2_alpha,
        corollary2_rate: corollary2_rhs(b, d, l, n, k, p.sigma2, p.f_gap),
        decentralized_alpha: dec_alpha,
        decentralized_beta: dec_beta,
        lagrangian_smoothness: l_l,
        decentralized_step_limit: l_l.map(|l_l| step_limit(d, l_l)),
        decentralized_admissible: dec_rate.is_some(),
        decentralized_rate: dec_rate,
        corollary1_alpha: cor1_alpha,
        corollary1_beta: cor1_beta,
        corollary1_rate: p.lambda2.and_then(|l2| corollary1_rhs(b, d, l, l2, n, k, p.sigma2, p.f_gap)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constants_at_small_arguments() {
        assert_eq!(c0(1.0, 0.0), 0.0);
        assert_eq!(c1(2.0, 1.0), 49.0);
        assert_eq!(c0(1.0, 1.0), 1.0 + 3.0 * 3.0);
        assert_eq!(c2(1.0, 0.0), None);
        assert_eq!(c2(1.0, 1.0), Some(10.0));
    }

    #[test]
    fn block_rate_reference_value() {
        // D=0 leaves 3·1/(0.5·0.75)/100 + 0.5·(1/(2·0.75)) = 0.08 + 1/3
        let v = lemma1_rhs(1.0, 0.0, 1.0, 1.0, 0.5, 100.0, 1.0, 1.0).unwrap();
        assert!((v - (0.08 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn steps_at_the_limit_are_inadmissible() {
        assert!(lemma1_rhs(1.0, 2.0, 1.0, 1.0, step_limit(2.0, 1.0), 10.0, 1.0, 1.0).is_none());
        let l_l = lagrangian_smoothness(1.0, -0.5, 0.1);
        assert_eq!(l_l, 16.0);
        assert!(theorem1_rhs(1.0, 1.0, 1.0, 0.5, -0.5, 4.0, 0.1, step_limit(1.0, l_l), 10.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn corollary1_beta_is_admissible_for_its_alpha() {
        let (a, b) = corollary1_steps(3.0, 2.0, 1000.0);
        let l_l = lagrangian_smoothness(2.0, -1.0, a);
        assert!(b < step_limit(3.0, l_l));
    }

    #[test]
    fn evaluate_rejects_zero_b() {
        let p = BoundParams {
            b: 0,
            d: 0,
            l_f: 1.0,
            n: 1,
            k: 1,
            sigma2: 0.0,
            f_gap: 0.0,
            lambda2: None,
            lambda_min: None,
            alpha: None,
            beta: None,
        };
        assert!(evaluate_bounds(&p).is_err());
    }

    proptest! {
        #[test]
        fn constants_grow_with_delays(b in 1u64..20, d in 0u64..20) {
            let (bf, df) = (b as f64, d as f64);
            prop_assert!(c0(bf, df + 1.0) > c0(bf, df));
            prop_assert!(c1(bf + 1.0, df) > c1(bf, df));
            prop_assert!(c1(bf, df) >= 3.0 * bf * bf);
        }

        #[test]
        fn block_rate_grows_with_noise(alpha in 0.01f64..0.6, s in 0.0f64..5.0) {
            let lo = lemma1_rhs(2.0, 1.0, 1.0, 3.0, alpha, 50.0, s, 1.0);
            let hi = lemma1_rhs(2.0, 1.0, 1.0, 3.0, alpha, 50.0, s + 1.0, 1.0);
            match (lo, hi) {
                (Some(lo), Some(hi)) => prop_assert!(hi > lo),
                (None, None) => prop_assert!(alpha >= step_limit(1.0, 1.0)),
                _ => prop_assert!(false),
            }
        }
    }
}
