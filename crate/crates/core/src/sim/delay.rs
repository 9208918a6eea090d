//! Bounded delay distributions and per-scenario delay models.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{LabError, Result};
use crate::rng::SimRng;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Log-normal shape truncated to `[lo, hi]`, with the location chosen so the
/// *truncated* distribution has the requested mean.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySampler {
    mean: f64,
    lo: f64,
    hi: f64,
    kind: SamplerKind,
}

#[derive(Clone, Debug, PartialEq)]
enum SamplerKind {
    Point(f64),
    TruncatedLogNormal {
        mu: f64,
        sigma: f64,
        cdf_lo: f64,
        cdf_hi: f64,
    },
}

impl DelaySampler {
    /// Point mass at `value`.
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(LabError::Delay(format!("constant delay must be finite and ≥ 0, got {value}")));
        }
        Ok(Self {
            mean: value,
            lo: value,
            hi: value,
            kind: SamplerKind::Point(value),
        })
    }

    /// `cv` is the coefficient of variation of the untruncated log-normal.
    pub fn truncated_lognormal(mean: f64, cv: f64, lo: f64, hi: f64) -> Result<Self> {
        if hi < lo {
            return Err(LabError::Delay(format!("support upper bound {hi} is below lower bound {lo}")));
        }
        if !(lo >= 0.0) || !hi.is_finite() {
            return Err(LabError::Delay(format!("support [{lo}, {hi}] must be finite and nonnegative")));
        }
        if lo == hi {
            return Ok(Self {
                mean: lo,
                lo,
                hi,
                kind: SamplerKind::Point(lo),
            });
        }
        if !(cv >= 0.0) {
            return Err(LabError::Delay(format!("coefficient of variation must be ≥ 0, got {cv}")));
        }
        if cv == 0.0 {
            if mean < lo || mean > hi {
                return Err(LabError::Delay(format!("mean {mean} outside support [{lo}, {hi}]")));
            }
            return Ok(Self {
                mean,
                lo,
                hi,
                kind: SamplerKind::Point(mean),
            });
        }
        if !(mean > lo && mean < hi) {
            return Err(LabError::Delay(format!(
                "mean {mean} must lie strictly inside the support [{lo}, {hi}]"
            )));
        }
        let sigma = (1.0 + cv * cv).ln().sqrt();
        let mu = calibrate_location(mean, sigma, lo, hi);
        let (cdf_lo, cdf_hi) = cdf_bounds(mu, sigma, lo, hi);
        Ok(Self {
            mean,
            lo,
            hi,
            kind: SamplerKind::TruncatedLogNormal {
                mu,
                sigma,
                cdf_lo,
                cdf_hi,
            },
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Inverse-CDF draw; consumes exactly one uniform.
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.gen();
        match self.kind {
            SamplerKind::Point(v) => v,
            SamplerKind::TruncatedLogNormal {
                mu,
                sigma,
                cdf_lo,
                cdf_hi,
            } => {
                let p = (cdf_lo + u * (cdf_hi - cdf_lo)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                (mu + sigma * std_normal_quantile(p)).exp().clamp(self.lo, self.hi)
            }
        }
    }

    /// Mean of the truncated distribution in closed form.
    pub fn analytic_mean(&self) -> f64 {
        match self.kind {
            SamplerKind::Point(v) => v,
            SamplerKind::TruncatedLogNormal { mu, sigma, .. } => truncated_mean(mu, sigma, self.lo, self.hi),
        }
    }

    /// Density of the truncated distribution (zero outside the support).
    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            SamplerKind::Point(_) => 0.0,
            SamplerKind::TruncatedLogNormal {
                mu,
                sigma,
                cdf_lo,
                cdf_hi,
            } => {
                if x < self.lo || x > self.hi || x <= 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt()) / (cdf_hi - cdf_lo)
            }
        }
    }
}

fn cdf_bounds(mu: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = if lo > 0.0 {
        std_normal_cdf((lo.ln() - mu) / sigma)
    } else {
        0.0
    };
    (a, std_normal_cdf((hi.ln() - mu) / sigma))
}

fn truncated_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = cdf_bounds(mu, sigma, lo, hi);
    let mass = b - a;
    if mass <= 1e-300 {
        // all mass sits beyond one end of the support
        return if (hi.ln() - mu) < 0.0 { hi } else { lo };
    }
    let a_s = if lo > 0.0 {
        std_normal_cdf((lo.ln() - mu) / sigma - sigma)
    } else {
        0.0
    };
    let b_s = std_normal_cdf((hi.ln() - mu) / sigma - sigma);
    ((mu + 0.5 * sigma * sigma).exp() * (b_s - a_s) / mass).clamp(lo, hi)
}

fn calibrate_location(mean: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let mut left = mean.ln() - 12.0 * sigma - 2.0;
    let mut right = mean.ln() + 12.0 * sigma + 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        if truncated_mean(mid, sigma, lo, hi) < mean {
            left = mid;
        } else {
            right = mid;
        }
    }
    0.5 * (left + right)
}

/// Shape parameters shared by all samplers a preset builds. Supports are
/// expressed as multiples of each sampler's mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayShape {
    pub compute_cv: f64,
    pub comm_cv: f64,
    pub lo_factor: f64,
    pub hi_factor: f64,
    /// Constant additive transit time after the port releases a message.
    pub propagation: f64,
}

impl Default for DelayShape {
    fn default() -> Self {
        // comm variance 4× the compute variance at equal means
        Self {
            compute_cv: 0.25,
            comm_cv: 0.5,
            lo_factor: 0.2,
            hi_factor: 5.0,
            propagation: 0.0,
        }
    }
}

impl DelayShape {
    /// Every sampler is a point mass at its mean.
    pub fn deterministic() -> Self {
        Self {
            compute_cv: 0.0,
            comm_cv: 0.0,
            lo_factor: 1.0,
            hi_factor: 1.0,
            propagation: 0.0,
        }
    }

    fn sampler(&self, mean: f64, cv: f64) -> Result<DelaySampler> {
        if mean == 0.0 || cv == 0.0 || self.lo_factor == self.hi_factor {
            return DelaySampler::constant(mean);
        }
        DelaySampler::truncated_lognormal(mean, cv, mean * self.lo_factor, mean * self.hi_factor)
    }

    pub fn compute_sampler(&self, mean: f64) -> Result<DelaySampler> {
        self.sampler(mean, self.compute_cv)
    }

    pub fn comm_sampler(&self, mean: f64) -> Result<DelaySampler> {
        self.sampler(mean, self.comm_cv)
    }
}

/// Per-agent compute delays and per-directed-link port occupancy times.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayModel {
    n: usize,
    compute: Vec<DelaySampler>,
    links: Vec<Option<DelaySampler>>,
    propagation: f64,
}

impl DelayModel {
    pub fn new(compute: Vec<DelaySampler>, link: impl Fn(usize, usize) -> Option<DelaySampler>, propagation: f64) -> Result<Self> {
        let n = compute.len();
        if !(propagation >= 0.0) || !propagation.is_finite() {
            return Err(LabError::Delay(format!("propagation must be finite and ≥ 0, got {propagation}")));
        }
        let mut links = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                links.push(if i == j { None } else { link(i, j) });
            }
        }
        Ok(Self {
            n,
            compute,
            links,
            propagation,
        })
    }

    /// Same sampler for every agent and for every link.
    pub fn uniform(n: usize, compute: DelaySampler, link: DelaySampler) -> Result<Self> {
        Self::new(vec![compute; n], |_, _| Some(link.clone()), 0.0)
    }

    /// Every compute takes `compute`, every transmission `comm`.
    pub fn constant(n: usize, compute: f64, comm: f64) -> Result<Self> {
        Self::uniform(n, DelaySampler::constant(compute)?, DelaySampler::constant(comm)?)
    }

    pub fn with_propagation(mut self, propagation: f64) -> Result<Self> {
        if !(propagation >= 0.0) || !propagation.is_finite() {
            return Err(LabError::Delay(format!("propagation must be finite and ≥ 0, got {propagation}")));
        }
        self.propagation = propagation;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn compute(&self, agent: usize) -> &DelaySampler {
        &self.compute[agent]
    }

    pub fn link(&self, src: usize, dst: usize) -> Result<&DelaySampler> {
        self.links[src * self.n + dst]
            .as_ref()
            .ok_or_else(|| LabError::Delay(format!("no delay sampler for link {src}→{dst}")))
    }

    pub fn propagation(&self) -> f64 {
        self.propagation
    }

    pub fn max_compute(&self) -> f64 {
        self.compute.iter().map(|s| s.support().1).fold(0.0, f64::max)
    }

    pub fn min_compute(&self) -> f64 {
        self.compute.iter().map(|s| s.support().0).fold(f64::INFINITY, f64::min)
    }

    pub fn max_link(&self) -> f64 {
        self.links.iter().flatten().map(|s| s.support().1).fold(0.0, f64::max)
    }
}

/// The five built-in delay scenarios plus a fully custom one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayCase {
    Base,
    SlowComm,
    CompStraggler,
    CommStraggler,
    CombinedStraggler,
    Custom,
}

impl DelayCase {
    pub const TABLE: [DelayCase; 5] = [
        DelayCase::Base,
        DelayCase::SlowComm,
        DelayCase::CompStraggler,
        DelayCase::CommStraggler,
        DelayCase::CombinedStraggler,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DelayCase::Base => "base",
            DelayCase::SlowComm => "slow_comm",
            DelayCase::CompStraggler => "comp_straggler",
            DelayCase::CommStraggler => "comm_straggler",
            DelayCase::CombinedStraggler => "combined_straggler",
            DelayCase::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::TABLE
            .iter()
            .chain([DelayCase::Custom].iter())
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| LabError::Config(format!("unknown delay case `{s}`")))
    }
}

/// Parameters of a preset beyond the case itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetParams {
    pub comm_slowdown: f64,
    pub straggler_id: usize,
    pub straggler_factor: f64,
    pub shape: DelayShape,
    /// Means used by `Custom`.
    pub custom_compute_mean: f64,
    pub custom_comm_mean: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            comm_slowdown: 10.0,
            straggler_id: 0,
            straggler_factor: 10.0,
            shape: DelayShape::default(),
            custom_compute_mean: 1.0,
            custom_comm_mean: 1.0,
        }
    }
}

/// Mean compute delay of `agent` and mean occupancy of link `src→dst` for a case.
pub fn preset_means(case: DelayCase, params: &PresetParams, agent: usize, link: (usize, usize)) -> (f64, f64) {
    let s = params.straggler_id;
    let f = params.straggler_factor;
    let (src, dst) = link;
    let incident = src == s || dst == s;
    match case {
        DelayCase::Base => (1.0, 1.0),
        DelayCase::SlowComm => (1.0, params.comm_slowdown),
        DelayCase::CompStraggler => (if agent == s { f } else { 1.0 }, 1.0),
        DelayCase::CommStraggler => (1.0, if incident { f } else { 1.0 }),
        DelayCase::CombinedStraggler => (if agent == s { f } else { 1.0 }, if incident { f } else { 1.0 }),
        DelayCase::Custom => (params.custom_compute_mean, params.custom_comm_mean),
    }
}

pub fn preset_delay_model(case: DelayCase, n: usize, params: &PresetParams) -> Result<DelayModel> {
    let straggling = matches!(
        case,
        DelayCase::CompStraggler | DelayCase::CommStraggler | DelayCase::CombinedStraggler
    );
    if straggling && params.straggler_id >= n {
        return Err(LabError::Config(format!(
            "straggler_id {} out of range for {n} agents",
            params.straggler_id
        )));
    }
    if !(params.comm_slowdown > 0.0) || !(params.straggler_factor > 0.0) {
        return Err(LabError::Config("slowdown factors must be positive".into()));
    }
    let compute = (0..n)
        .map(|i| params.shape.compute_sampler(preset_means(case, params, i, (0, 0)).0))
        .collect::<Result<Vec<_>>>()?;
    let mut links: Vec<Option<DelaySampler>> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            links.push(if i == j {
                None
            } else {
                Some(params.shape.comm_sampler(preset_means(case, params, usize::MAX, (i, j)).1)?)
            });
        }
    }
    DelayModel::new(compute, |i, j| links[i * n + j].clone(), params.shape.propagation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamDomain};

    #[test]
    fn point_mass_support() {
        let s = DelaySampler::truncated_lognormal(3.0, 0.5, 2.0, 2.0).unwrap();
        let mut rng = stream(1, StreamDomain::Auxiliary, 0);
        for _ in 0..10 {
            assert_eq!(s.sample(&mut rng), 2.0);
        }
    }

    #[test]
    fn reversed_support_is_rejected() {
        assert!(DelaySampler::truncated_lognormal(1.0, 0.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn samples_stay_in_support() {
        let s = DelaySampler::truncated_lognormal(1.0, 1.5, 0.3, 2.5).unwrap();
        let mut rng = stream(2, StreamDomain::Auxiliary, 0);
        for _ in 0..20_000 {
            let v = s.sample(&mut rng);
            assert!((0.3..=2.5).contains(&v));
        }
    }

    #[test]
    fn straggler_presets() {
        let p = PresetParams {
            straggler_id: 0,
            ..Default::default()
        };
        assert_eq!(preset_means(DelayCase::CompStraggler, &p, 0, (1, 2)), (10.0, 1.0));
        assert_eq!(preset_means(DelayCase::CompStraggler, &p, 1, (0, 1)), (1.0, 1.0));
        assert_eq!(preset_means(DelayCase::CommStraggler, &p, 0, (1, 2)), (1.0, 1.0));
        assert_eq!(preset_means(DelayCase::CommStraggler, &p, 3, (2, 0)), (1.0, 10.0));
        assert_eq!(preset_means(DelayCase::SlowComm, &p, 3, (2, 1)), (1.0, 10.0));
        let slow2 = PresetParams {
            comm_slowdown: 2.0,
            ..p
        };
        assert_eq!(preset_means(DelayCase::SlowComm, &slow2, 3, (2, 1)), (1.0, 2.0));
        assert!(preset_delay_model(DelayCase::CompStraggler, 3, &PresetParams { straggler_id: 3, ..p }).is_err());
    }
}
