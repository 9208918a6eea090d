//! Experiment configuration in TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{AlgorithmKind, SnapshotTiming};
use crate::error::{LabError, Result};
use crate::graph::TopologyKind;
use crate::sim::{Budget, DelayCase, DelayShape, PresetParams, SendPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    LogregSynthetic,
    LogregIdx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Instance seed, shared by all run seeds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exact_gradients: bool,
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    #[serde(default = "defaults::condition")]
    pub condition: f64,
    #[serde(default)]
    pub noise_sigma2: f64,
    #[serde(default = "defaults::one")]
    pub minimizer_spread: f64,
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::one")]
    pub separation: f64,
    #[serde(default = "defaults::reg_weight")]
    pub reg_weight: f64,
    /// Tail fraction held out for the test loss.
    #[serde(default)]
    pub test_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Digit labels at or above this value form the positive class.
    #[serde(default = "defaults::label_threshold")]
    pub label_threshold: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Termination {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sim_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_updates: Option<u64>,
}

impl Termination {
    pub fn budget(&self) -> Result<Budget> {
        match (self.max_sim_time, self.max_updates) {
            (Some(t), None) if t > 0.0 && t.is_finite() => Ok(Budget::SimTime(t)),
            (None, Some(u)) if u > 0 => Ok(Budget::Updates(u)),
            (Some(_), Some(_)) => Err(LabError::Config(
                "set exactly one of termination.max_sim_time and termination.max_updates".into(),
            )),
            (None, None) => Err(LabError::Config("missing termination criterion".into())),
            _ => Err(LabError::Config("termination budget must be positive".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomDelay {
    pub compute_mean: f64,
    pub comm_mean: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    #[default]
    Fixed,
    /// Step sizes from the rate corollaries, using the smoothness constant,
    /// a pilot-audited delay bound and the update budget.
    Theory,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    #[serde(default = "defaults::yes")]
    pub lemma2: bool,
    /// First virtual index whose iterates are kept.
    #[serde(default)]
    pub window_start: u64,
    /// Number of updates whose iterates are kept.
    #[serde(default = "defaults::window")]
    pub window_len: u64,
    #[serde(default = "defaults::yes")]
    pub write_trace: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            lemma2: true,
            window_start: 0,
            window_len: defaults::window(),
            write_trace: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::name")]
    pub name: String,
    pub n_agents: usize,
    pub topology: TopologyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    pub algorithm: AlgorithmKind,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub step_rule: StepRule,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default = "defaults::delay_case")]
    pub delay_case: DelayCase,
    #[serde(default = "defaults::ten")]
    pub comm_slowdown: f64,
    #[serde(default)]
    pub straggler_id: usize,
    #[serde(default = "defaults::ten")]
    pub straggler_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_delay: Option<CustomDelay>,
    #[serde(default)]
    pub delay_shape: DelayShape,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    pub termination: Termination,
    /// Defaults to `n_agents`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_loss: Option<f64>,
    #[serde(default)]
    pub send_policy: SendPolicy,
    #[serde(default)]
    pub snapshot: SnapshotTiming,
    /// Half-width of the uniform box the shared initial model is drawn from.
    #[serde(default)]
    pub init_scale: f64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub audit: AuditConfig,
}

mod defaults {
    use crate::sim::DelayCase;

    pub fn name() -> String {
        "experiment".into()
    }
    pub fn alpha() -> f64 {
        0.01
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn delay_case() -> DelayCase {
        DelayCase::Base
    }
    pub fn ten() -> f64 {
        10.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn seeds() -> Vec<u64> {
        (0..5).collect()
    }
    pub fn dim() -> usize {
        10
    }
    pub fn condition() -> f64 {
        10.0
    }
    pub fn samples() -> usize {
        2000
    }
    pub fn reg_weight() -> f64 {
        0.01
    }
    pub fn label_threshold() -> u32 {
        5
    }
    pub fn window() -> u64 {
        20_000
    }
    pub fn yes() -> bool {
        true
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(LabError::Config("n_agents must be ≥ 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(LabError::Config("seeds must be nonempty".into()));
        }
        self.termination.budget()?;
        positive("alpha", self.alpha)?;
        if let Some(b) = self.beta {
            positive("beta", b)?;
        }
        match self.algorithm {
            AlgorithmKind::AdsgdDoubleStep => {
                if self.step_rule == StepRule::Fixed {
                    let b = self
                        .beta
                        .ok_or_else(|| LabError::Config("adsgd_double_step needs beta".into()))?;
                    if b > self.alpha {
                        return Err(LabError::Config(format!(
                            "beta={b} exceeds alpha={}: the transformed weights (1 − β/α)I + (β/α)W \
                             lose nonnegativity on the diagonal",
                            self.alpha
                        )));
                    }
                }
            }
            AlgorithmKind::Asbcd => {}
            other => {
                if self.beta.is_some() {
                    return Err(LabError::Config(format!("beta does not apply to {other}")));
                }
                if self.step_rule == StepRule::Theory {
                    return Err(LabError::Config(format!(
                        "step_rule = \"theory\" is defined for adsgd_double_step and asbcd, not {other}"
                    )));
                }
            }
        }
        if self.topology == TopologyKind::Custom && self.edges.is_none() {
            return Err(LabError::Config("topology = \"custom\" needs an edges list".into()));
        }
        if self.topology != TopologyKind::Custom && self.edges.is_some() {
            return Err(LabError::Config("edges are only read for topology = \"custom\"".into()));
        }
        if self.delay_case == DelayCase::Custom && self.custom_delay.is_none() {
            return Err(LabError::Config("delay_case = \"custom\" needs a [custom_delay] section".into()));
        }
        let straggling = matches!(
            self.delay_case,
            DelayCase::CompStraggler | DelayCase::CommStraggler | DelayCase::CombinedStraggler
        );
        if straggling && self.straggler_id >= self.n_agents {
            return Err(LabError::Config(format!(
                "straggler_id {} out of range for {} agents",
                self.straggler_id, self.n_agents
            )));
        }
        positive("comm_slowdown", self.comm_slowdown)?;
        positive("straggler_factor", self.straggler_factor)?;
        if self.batch_size == 0 {
            return Err(LabError::Config("batch_size must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.heterogeneity) {
            return Err(LabError::Config("heterogeneity must lie in [0, 1]".into()));
        }
        if self.metric_stride == Some(0) {
            return Err(LabError::Config("metric_stride must be ≥ 1".into()));
        }
        if !(self.init_scale >= 0.0) {
            return Err(LabError::Config("init_scale must be ≥ 0".into()));
        }
        if self.audit.window_len == 0 && self.audit.lemma2 {
            return Err(LabError::Config("audit.window_len must be ≥ 1 when lemma2 is on".into()));
        }
        let p = &self.problem;
        if p.dim == 0 {
            return Err(LabError::Config("problem.dim must be ≥ 1".into()));
        }
        if !(p.condition >= 1.0) {
            return Err(LabError::Config("problem.condition must be ≥ 1".into()));
        }
        if !(p.noise_sigma2 >= 0.0) || !(p.minimizer_spread >= 0.0) || !(p.reg_weight >= 0.0) {
            return Err(LabError::Config("problem noise, spread and reg_weight must be ≥ 0".into()));
        }
        if !(0.0..1.0).contains(&p.test_fraction) {
            return Err(LabError::Config("problem.test_fraction must lie in [0, 1)".into()));
        }
        if p.kind == ProblemKind::LogregSynthetic && p.samples < self.n_agents {
            return Err(LabError::Config("problem.samples must be at least n_agents".into()));
        }
        if p.kind == ProblemKind::LogregIdx && (p.images.is_none() || p.labels.is_none()) {
            return Err(LabError::Config("logreg_idx needs problem.images and problem.labels".into()));
        }
        Ok(())
    }

    pub fn budget(&self) -> Budget {
        self.termination.budget().expect("validated config")
    }

    pub fn stride(&self) -> u64 {
        self.metric_stride.unwrap_or(self.n_agents as u64).max(1)
    }

    pub fn preset_params(&self) -> PresetParams {
        let custom = self.custom_delay.unwrap_or(CustomDelay {
            compute_mean: 1.0,
            comm_mean: 1.0,
        });
        PresetParams {
            comm_slowdown: self.comm_slowdown,
            straggler_id: self.straggler_id,
            straggler_factor: self.straggler_factor,
            shape: self.delay_shape,
            custom_compute_mean: custom.compute_mean,
            custom_comm_mean: custom.comm_mean,
        }
    }

    /// Canonical JSON: struct field order, shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(format!("cannot render TOML: {e}")))
    }
}

/// Parses TOML, or JSON when the document starts with `{`, then validates.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file; relative dataset paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.problem.images, &mut cfg.problem.labels].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}
