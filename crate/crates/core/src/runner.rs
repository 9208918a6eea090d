//! Builds experiments from a config, runs case × seed grids and writes run
//! directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    Adsgd, AlgorithmKind, Asbcd, BlockGradientOracle, MemEffAdsgd, ParallelSgd, PenalizedConsensus, SyncDsgd,
};
use crate::audit::{self, bounds, AuditReport, DelayBounds};
use crate::config::{ExperimentConfig, ProblemKind, StepRule};
use crate::error::{LabError, Result};
use crate::graph::{build_topology, metropolis_weights, MixingMatrix, Topology, TopologyKind};
use crate::metrics::{self, MetricSample, SeriesLabel};
use crate::problems::{
    exact_oracles, make_nonconvex_logreg, make_quadratic_with, read_idx_pair, stochastic_oracles, synthetic_blobs,
    Dataset, GlobalObjective, LocalProblem, LogisticProblem, OracleSet, PartitionSpec, QuadraticSpec, TargetRule,
};
use crate::rng::{stream, StreamDomain};
use crate::sim::{
    preset_delay_model, run_async, run_rounds, AsyncAlgorithm, Budget, DelayCase, DelayModel, EngineSettings,
    EventTrace, RoundAlgorithm, RunOutcome,
};

pub const OUTPUT_ENV: &str = "ADSGD_LAB_OUT";

/// Output root: `$ADSGD_LAB_OUT`, else `./runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// Problem instance shared by every seed of a config.
#[derive(Clone, Debug)]
pub struct Instance {
    pub locals: Vec<Arc<dyn LocalProblem>>,
    pub objective: GlobalObjective,
    pub heldout: Option<Arc<dyn LocalProblem>>,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn oracles(&self, exact: bool) -> OracleSet<f64> {
        if exact {
            exact_oracles(&self.locals)
        } else {
            stochastic_oracles(&self.locals)
        }
    }
}

fn logreg_instance(cfg: &ExperimentConfig, data: Dataset) -> Result<Instance> {
    let p = &cfg.problem;
    let (train, test) = if p.test_fraction > 0.0 {
        let (a, b) = data.split_tail(p.test_fraction)?;
        (a, Some(b))
    } else {
        (data, None)
    };
    let spec = PartitionSpec {
        n_agents: cfg.n_agents,
        heterogeneity: cfg.heterogeneity,
        seed: p.seed,
    };
    let locals: Vec<Arc<dyn LocalProblem>> = make_nonconvex_logreg(Arc::new(train), &spec, p.reg_weight, cfg.batch_size)?
        .into_iter()
        .map(|l| l as Arc<dyn LocalProblem>)
        .collect();
    let heldout = match test {
        Some(t) => {
            let all: Vec<usize> = (0..t.len()).collect();
            Some(Arc::new(LogisticProblem::new(0, Arc::new(t), all, p.reg_weight, cfg.batch_size)?) as Arc<dyn LocalProblem>)
        }
        None => None,
    };
    Ok(Instance {
        objective: GlobalObjective::new(locals.clone()),
        locals,
        heldout,
    })
}

pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    let p = &cfg.problem;
    match p.kind {
        ProblemKind::Quadratic => {
            let spec = QuadraticSpec {
                n_agents: cfg.n_agents,
                dim: p.dim,
                seed: p.seed,
                condition: p.condition,
                noise_sigma2: p.noise_sigma2,
                minimizer_spread: p.minimizer_spread,
            };
            let locals: Vec<Arc<dyn LocalProblem>> = make_quadratic_with(&spec)?
                .into_iter()
                .map(|q| q as Arc<dyn LocalProblem>)
                .collect();
            Ok(Instance {
                objective: GlobalObjective::new(locals.clone()),
                locals,
                heldout: None,
            })
        }
        ProblemKind::LogregSynthetic => logreg_instance(cfg, synthetic_blobs(p.samples, p.dim, p.separation, p.seed)?),
        ProblemKind::LogregIdx => {
            let (images, labels) = p.images.as_ref().zip(p.labels.as_ref()).expect("validated config");
            logreg_instance(cfg, read_idx_pair(images, labels, TargetRule::Threshold(p.label_threshold))?)
        }
    }
}

pub fn build_topology_for(cfg: &ExperimentConfig) -> Result<Topology> {
    match cfg.topology {
        TopologyKind::Custom => Topology::from_edges(cfg.n_agents, cfg.edges.clone().unwrap_or_default()),
        kind => build_topology(kind, cfg.n_agents),
    }
}

pub fn delay_model_for(cfg: &ExperimentConfig, case: DelayCase) -> Result<DelayModel> {
    preset_delay_model(case, cfg.n_agents, &cfg.preset_params())
}

/// Drives the event schedule without any model state.
struct ScheduleProbe(usize);

impl AsyncAlgorithm for ScheduleProbe {
    type Scalar = f64;
    type Message = ();

    fn n_agents(&self) -> usize {
        self.0
    }
    fn initial_message(&self, _: usize) {}
    fn on_compute_start(&mut self, _: usize) {}
    fn on_compute_done(&mut self, _: usize) -> Result<()> {
        Ok(())
    }
    fn on_arrival(&mut self, _: usize, _: usize, _: u64, _: ()) {}
    fn coalesce(&self, _: &mut (), _: ()) {}
    fn iterate(&self, _: usize) -> &[f64] {
        &[]
    }
}

/// Runs only the delay schedule for `updates` commits and audits it. The
/// schedule does not depend on model values, so this matches the bounds of
/// any asynchronous algorithm under the same delays and seed.
pub fn pilot_bounds(cfg: &ExperimentConfig, topology: &Topology, delays: &DelayModel, seed: u64, updates: u64) -> Result<(DelayBounds, f64)> {
    let mut probe = ScheduleProbe(cfg.n_agents);
    let settings = EngineSettings::updates(updates).with_policy(cfg.send_policy);
    let out = run_async(topology, delays, seed, &mut probe, &settings, |_, _, _| {})?;
    Ok((audit::measure_bounds(&out.trace)?, out.end_time))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub beta: Option<f64>,
    /// Delay bound from the pilot run when the theory rule was used.
    pub pilot_d: Option<u64>,
    pub horizon: Option<u64>,
}

pub fn resolve_steps(
    cfg: &ExperimentConfig,
    instance: &Instance,
    topology: &Topology,
    w: &MixingMatrix,
    delays: &DelayModel,
    seed: u64,
) -> Result<StepSizes> {
    if cfg.step_rule == StepRule::Fixed {
        return Ok(StepSizes {
            alpha: cfg.alpha,
            beta: cfg.beta,
            pilot_d: None,
            horizon: None,
        });
    }
    let n = cfg.n_agents as u64;
    let pilot_len = match cfg.budget() {
        Budget::Updates(u) => u.min(200 * n),
        Budget::SimTime(_) => 200 * n,
    };
    let (b, pilot_time) = pilot_bounds(cfg, topology, delays, seed, pilot_len)?;
    let k = match cfg.budget() {
        Budget::Updates(u) => u,
        Budget::SimTime(t) => ((pilot_len as f64) * t / pilot_time.max(f64::MIN_POSITIVE)).ceil() as u64,
    }
    .max(1);
    let l_f = instance.objective.max_smoothness();
    match cfg.algorithm {
        AlgorithmKind::AdsgdDoubleStep => {
            let d = b.d_adsgd;
            let (alpha, beta) = bounds::corollary1_steps(d as f64, l_f, k as f64);
            Ok(StepSizes {
                alpha,
                beta: Some(beta),
                pilot_d: Some(d),
                horizon: Some(k),
            })
        }
        AlgorithmKind::Asbcd => {
            let d = b.d_asbcd;
            let l_l = PenalizedConsensus::lagrangian_smoothness(l_f, w, cfg.alpha);
            Ok(StepSizes {
                alpha: cfg.alpha,
                beta: Some(bounds::corollary2_step(d as f64, l_l, k as f64)),
                pilot_d: Some(d),
                horizon: Some(k),
            })
        }
        other => Err(LabError::Config(format!("no theory step rule for {other}"))),
    }
}

fn initial_model(cfg: &ExperimentConfig, dim: usize, seed: u64) -> Vec<f64> {
    if cfg.init_scale == 0.0 {
        return vec![0.0; dim];
    }
    let mut rng = stream(seed, StreamDomain::Initialization, 0);
    (0..dim).map(|_| rng.gen_range(-cfg.init_scale..=cfg.init_scale)).collect()
}

/// One `(case, seed)` run.
#[derive(Debug)]
pub struct RunResult {
    pub config_hash: String,
    pub algorithm: AlgorithmKind,
    pub case: DelayCase,
    pub seed: u64,
    pub steps: StepSizes,
    pub metrics: Vec<MetricSample>,
    pub audit: AuditReport,
    pub divergence: Option<String>,
    pub end_time: f64,
    pub updates: u64,
    pub final_models: Vec<Vec<f64>>,
    pub heldout_loss: Option<f64>,
    pub trace: EventTrace,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn time_to_target(&self, target: f64) -> Option<f64> {
        metrics::time_to_target(&self.metrics, target)
    }
}

struct Sampler<'a> {
    objective: &'a GlobalObjective,
    samples: Vec<MetricSample>,
    error: Option<LabError>,
}

impl<'a> Sampler<'a> {
    fn new(objective: &'a GlobalObjective) -> Self {
        Self {
            objective,
            samples: Vec::new(),
            error: None,
        }
    }

    fn take(&mut self, time: f64, k: u64, models: Vec<Vec<f64>>) {
        if self.samples.last().is_some_and(|s| s.k == k) {
            return;
        }
        match metrics::sample(self.objective, time, k, &models) {
            Ok(s) => self.samples.push(s),
            Err(e) => {
                self.error.get_or_insert(e);
            }
        }
    }

    fn finish(self) -> Result<Vec<MetricSample>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.samples),
        }
    }
}

fn models_of(n: usize, iterate: impl Fn(usize) -> Vec<f64>) -> Vec<Vec<f64>> {
    (0..n).map(iterate).collect()
}

fn drive_async<A: AsyncAlgorithm<Scalar = f64>>(
    topology: &Topology,
    delays: &DelayModel,
    seed: u64,
    mut alg: A,
    settings: &EngineSettings,
    objective: &GlobalObjective,
) -> Result<(RunOutcome, Vec<MetricSample>, Vec<Vec<f64>>)> {
    let n = alg.n_agents();
    let mut sampler = Sampler::new(objective);
    let out = run_async(topology, delays, seed, &mut alg, settings, |t, k, a| {
        sampler.take(t, k, models_of(n, |i| a.iterate(i).to_vec()))
    })?;
    let finals = models_of(n, |i| alg.iterate(i).to_vec());
    if out.divergence.is_none() {
        sampler.take(out.end_time, out.updates, finals.clone());
    }
    Ok((out, sampler.finish()?, finals))
}

fn drive_rounds<A: RoundAlgorithm>(
    topology: &Topology,
    delays: &DelayModel,
    seed: u64,
    mut alg: A,
    settings: &EngineSettings,
    objective: &GlobalObjective,
) -> Result<(RunOutcome, Vec<MetricSample>, Vec<Vec<f64>>)> {
    let n = alg.n_agents();
    let mut sampler = Sampler::new(objective);
    let out = run_rounds(topology, delays, seed, &mut alg, settings, |t, k, a| {
        sampler.take(t, k, models_of(n, |i| a.iterate(i).to_vec()))
    })?;
    let finals = models_of(n, |i| alg.iterate(i).to_vec());
    if out.divergence.is_none() {
        sampler.take(out.end_time, out.updates, finals.clone());
    }
    Ok((out, sampler.finish()?, finals))
}

/// Prebuilt pieces shared by the seeds of one config.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hash: String,
    pub instance: Instance,
    pub topology: Topology,
    pub w: MixingMatrix,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let topology = build_topology_for(config)?;
        let w = metropolis_weights(&topology)?;
        Ok(Self {
            hash: config.hash(),
            instance: build_instance(config)?,
            config: config.clone(),
            topology,
            w,
        })
    }

    pub fn run(&self, case: DelayCase, seed: u64) -> Result<RunResult> {
        let cfg = &self.config;
        let delays = delay_model_for(cfg, case)?;
        let steps = resolve_steps(cfg, &self.instance, &self.topology, &self.w, &delays, seed)?;
        let mut settings = EngineSettings {
            budget: cfg.budget(),
            ..EngineSettings::updates(0)
        }
        .with_policy(cfg.send_policy)
        .with_stride(cfg.stride());
        if cfg.audit.lemma2 {
            settings = settings.with_iterate_window(cfg.audit.window_start, cfg.audit.window_len);
        }
        let n = cfg.n_agents;
        let x0 = initial_model(cfg, self.instance.dim(), seed);
        let initial = vec![x0.clone(); n];
        let oracles = self.instance.oracles(cfg.problem.exact_gradients);
        let obj = &self.instance.objective;
        let (top, w) = (&self.topology, &self.w);
        let (out, samples, finals) = match cfg.algorithm {
            AlgorithmKind::Adsgd => {
                drive_async(top, &delays, seed, Adsgd::new(w, steps.alpha, oracles, initial, seed)?, &settings, obj)?
            }
            AlgorithmKind::AdsgdMemEff => drive_async(
                top,
                &delays,
                seed,
                MemEffAdsgd::new(w, steps.alpha, oracles, initial, seed)?,
                &settings,
                obj,
            )?,
            AlgorithmKind::AdsgdDoubleStep => {
                let beta = steps.beta.expect("validated config");
                let alg = Adsgd::double_step(w, steps.alpha, beta, oracles, initial, seed)?;
                drive_async(top, &delays, seed, alg, &settings, obj)?
            }
            AlgorithmKind::Asbcd => {
                let oracle: Arc<dyn BlockGradientOracle<f64>> =
                    Arc::new(PenalizedConsensus::oracle::<f64>(w, steps.alpha, oracles));
                let step = steps.beta.unwrap_or(steps.alpha);
                let alg = Asbcd::new(oracle, step, initial, cfg.snapshot, seed)?;
                drive_async(top, &delays, seed, alg, &settings, obj)?
            }
            AlgorithmKind::SyncDsgd => {
                drive_rounds(top, &delays, seed, SyncDsgd::new(w, steps.alpha, oracles, initial, seed)?, &settings, obj)?
            }
            AlgorithmKind::ParallelSgd => {
                drive_rounds(top, &delays, seed, ParallelSgd::new(steps.alpha, oracles, x0, seed), &settings, obj)?
            }
        };
        let mut trace = out.trace;
        trace.config_hash = Some(self.hash.clone());
        let audit = audit::audit_trace(&trace)?;
        trace.iterates = None;
        let heldout_loss = match (&self.instance.heldout, out.divergence.is_none()) {
            (Some(h), true) => Some(h.loss(metrics::average_model(&finals)?.as_slice())),
            _ => None,
        };
        Ok(RunResult {
            config_hash: self.hash.clone(),
            algorithm: cfg.algorithm,
            case,
            seed,
            steps,
            metrics: samples,
            audit,
            divergence: out.divergence.map(|e| e.to_string()),
            end_time: out.end_time,
            updates: out.updates,
            final_models: finals,
            heldout_loss,
            trace,
        })
    }
}

/// Every case × seed, in parallel; results are ordered by case then seed.
pub fn run_suite(cfg: &ExperimentConfig, cases: &[DelayCase]) -> Result<Vec<RunResult>> {
    let exp = Experiment::new(cfg)?;
    let jobs: Vec<(DelayCase, u64)> = cases
        .iter()
        .flat_map(|&c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    jobs.par_iter().map(|&(c, s)| exp.run(c, s)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub case: DelayCase,
    pub seed: u64,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub diverged: bool,
    pub divergence: Option<String>,
    pub end_time: f64,
    pub updates: u64,
    pub time_to_target: Option<f64>,
    pub final_loss: Option<f64>,
    pub final_grad_norm_sq: Option<f64>,
    pub final_consensus_error: Option<f64>,
    pub mean_grad_norm_sq: Option<f64>,
    pub heldout_loss: Option<f64>,
    pub bounds: Option<DelayBounds>,
    pub lemma2_passed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseTiming {
    pub per_seed: Vec<Option<f64>>,
    /// Mean over seeds that reached the target; absent when none did.
    pub mean: Option<f64>,
    pub reached: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub name: String,
    pub algorithm: AlgorithmKind,
    pub n_agents: usize,
    pub target_loss: Option<f64>,
    pub any_divergence: bool,
    pub runs: Vec<RunSummary>,
    pub time_to_target: BTreeMap<String, CaseTiming>,
    /// Keyed by agent count; the smallest count is the baseline.
    pub speedup: BTreeMap<usize, Option<f64>>,
}

pub fn summarize(cfg: &ExperimentConfig, results: &[RunResult]) -> Result<Summary> {
    let target = cfg.target_loss;
    let runs: Vec<RunSummary> = results
        .iter()
        .map(|r| {
            let last = r.metrics.last();
            RunSummary {
                case: r.case,
                seed: r.seed,
                alpha: r.steps.alpha,
                beta: r.steps.beta,
                diverged: r.diverged(),
                divergence: r.divergence.clone(),
                end_time: r.end_time,
                updates: r.updates,
                time_to_target: target.and_then(|t| r.time_to_target(t)),
                final_loss: last.map(|s| s.loss_at_mean),
                final_grad_norm_sq: last.map(|s| s.grad_norm_sq),
                final_consensus_error: last.map(|s| s.consensus_error),
                mean_grad_norm_sq: metrics::running_grad_metric(&r.metrics).ok(),
                heldout_loss: r.heldout_loss,
                bounds: r.audit.bounds,
                lemma2_passed: (!r.audit.lemma2.is_empty()).then(|| r.audit.lemma2_passed()),
            }
        })
        .collect();
    let mut time_to_target = BTreeMap::new();
    for r in &runs {
        let e = time_to_target
            .entry(r.case.name().to_string())
            .or_insert_with(|| CaseTiming {
                per_seed: Vec::new(),
                mean: None,
                reached: 0,
            });
        e.per_seed.push(r.time_to_target);
    }
    for t in time_to_target.values_mut() {
        let hit: Vec<f64> = t.per_seed.iter().flatten().copied().collect();
        t.reached = hit.len();
        t.mean = (!hit.is_empty()).then(|| hit.iter().sum::<f64>() / hit.len() as f64);
    }
    let mean_all = time_to_target.values().find_map(|t| t.mean);
    let speedup = metrics::speedup(&BTreeMap::from([(cfg.n_agents, mean_all)]))?;
    Ok(Summary {
        config_hash: cfg.hash(),
        name: cfg.name.clone(),
        algorithm: cfg.algorithm,
        n_agents: cfg.n_agents,
        target_loss: target,
        any_divergence: runs.iter().any(|r| r.diverged),
        runs,
        time_to_target,
        speedup,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Config(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct AuditFile<'a> {
    case: DelayCase,
    seed: u64,
    #[serde(flatten)]
    report: &'a AuditReport,
}

/// Directory name for a config: `<name>-<first 12 hash chars>`.
pub fn run_dir_name(cfg: &ExperimentConfig) -> String {
    let name: String = cfg
        .name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{name}-{}", &cfg.hash()[..12])
}

/// Writes `config.toml`, `metrics.csv`, `summary.json` and per-run
/// `<case>/seed-<s>/{trace.csv, audit.json}` under `root`.
pub fn write_run_dir(root: &Path, cfg: &ExperimentConfig, results: &[RunResult]) -> Result<(PathBuf, Summary)> {
    let dir = root.join(run_dir_name(cfg));
    std::fs::create_dir_all(&dir)?;
    let hash = cfg.hash();
    std::fs::write(dir.join("config.toml"), format!("# config_hash={hash}\n{}", cfg.to_toml()?))?;
    let labels: Vec<(SeriesLabel<'_>, &[MetricSample])> = results
        .iter()
        .map(|r| {
            (
                SeriesLabel {
                    seed: r.seed,
                    algorithm: r.algorithm.name(),
                    case: r.case.name(),
                },
                r.metrics.as_slice(),
            )
        })
        .collect();
    metrics::write_metrics_csv(&dir.join("metrics.csv"), Some(&hash), &labels)?;
    for r in results {
        let sub = dir.join(r.case.name()).join(format!("seed-{}", r.seed));
        std::fs::create_dir_all(&sub)?;
        if cfg.audit.write_trace {
            r.trace.write_csv(&sub.join("trace.csv"))?;
        }
        write_json(
            &sub.join("audit.json"),
            &AuditFile {
                case: r.case,
                seed: r.seed,
                report: &r.audit,
            },
        )?;
    }
    let summary = summarize(cfg, results)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok((dir, summary))
}

/// Hashes found in a run directory's artifacts, by relative path.
pub fn collect_hashes(dir: &Path) -> Result<BTreeMap<String, Option<String>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).unwrap_or(&path).display().to_string();
            let hash = match path.extension().and_then(|e| e.to_str()) {
                Some("csv") | Some("toml") => std::fs::read_to_string(&path)?
                    .lines()
                    .find_map(|l| l.strip_prefix("# config_hash=").map(str::to_string)),
                Some("json") => {
                    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)
                        .map_err(|e| LabError::Config(format!("{rel}: {e}")))?;
                    v.get("config_hash").and_then(|h| h.as_str()).map(str::to_string)
                }
                _ => continue,
            };
            out.insert(rel, hash);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small(alg: &str) -> ExperimentConfig {
        small_with(alg, "")
    }

    fn small_with(alg: &str, extra: &str) -> ExperimentConfig {
        parse_config(&format!(
            r#"
n_agents = 4
topology = "grid"
algorithm = "{alg}"
{extra}
alpha = 0.05
seeds = [1, 2]
target_loss = 1e9

[termination]
max_updates = 200

[problem]
kind = "quadratic"
dim = 3
noise_sigma2 = 0.01
"#
        ))
        .unwrap()
    }

    #[test]
    fn suite_is_case_by_seed_product() {
        let cfg = small("adsgd");
        let r = run_suite(&cfg, &DelayCase::TABLE).unwrap();
        assert_eq!(r.len(), 10);
        assert_eq!((r[0].case, r[0].seed), (DelayCase::Base, 1));
        assert_eq!((r[9].case, r[9].seed), (DelayCase::CombinedStraggler, 2));
        assert!(r.iter().all(|x| x.audit.lemma2_passed() && x.updates == 200));
    }

    #[test]
    fn every_algorithm_runs() {
        for alg in AlgorithmKind::ALL {
            let extra = if alg == AlgorithmKind::AdsgdDoubleStep { "beta = 0.02" } else { "" };
            let cfg = small_with(alg.name(), extra);
            let r = Experiment::new(&cfg).unwrap().run(DelayCase::Base, 1).unwrap();
            assert!(!r.diverged(), "{alg}");
            assert!(r.metrics.len() >= 2, "{alg}");
            assert_eq!(r.time_to_target(1e9), Some(0.0));
        }
    }

    #[test]
    fn theory_rule_sets_admissible_steps() {
        let cfg = small_with("adsgd_double_step", "step_rule = \"theory\"");
        let exp = Experiment::new(&cfg).unwrap();
        let r = exp.run(DelayCase::Base, 1).unwrap();
        let d = r.steps.pilot_d.unwrap();
        let l_l = PenalizedConsensus::lagrangian_smoothness(exp.instance.objective.max_smoothness(), &exp.w, r.steps.alpha);
        assert!(r.steps.beta.unwrap() < bounds::step_limit(d as f64, l_l));
    }

    #[test]
    fn pilot_matches_a_real_run() {
        let cfg = small("adsgd");
        let exp = Experiment::new(&cfg).unwrap();
        let r = exp.run(DelayCase::SlowComm, 2).unwrap();
        let delays = delay_model_for(&cfg, DelayCase::SlowComm).unwrap();
        let (b, _) = pilot_bounds(&cfg, &exp.topology, &delays, 2, 200).unwrap();
        assert_eq!(Some(b), r.audit.bounds);
    }
}
