use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

use adsgd_core::algorithms::{Adsgd, AlgorithmKind};
use adsgd_core::config::parse_config;
use adsgd_core::graph::{build_topology, metropolis_weights, TopologyKind};
use adsgd_core::metrics::{self, parse_metrics_csv};
use adsgd_core::problems::{make_quadratic_with, GlobalObjective, GradientOracle, LocalProblem, ProblemOracle, QuadraticSpec};
use adsgd_core::runner::{collect_hashes, run_suite, write_run_dir};
use adsgd_core::sim::{preset_delay_model, run_async, AsyncAlgorithm, DelayCase, EngineSettings, EventTrace, PresetParams};

fn small_config(algorithm: &str) -> String {
    let beta = if algorithm == "adsgd_double_step" { "beta = 0.02\n" } else { "" };
    format!(
        r#"
name = "small-{algorithm}"
n_agents = 4
topology = "ring"
algorithm = "{algorithm}"
alpha = 0.05
{beta}seeds = [0, 1]
target_loss = 50.0

[termination]
max_sim_time = 30.0

[problem]
kind = "quadratic"
dim = 3
noise_sigma2 = 0.1

[audit]
window_len = 200
"#
    )
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn run_directories_are_byte_identical() {
    let cfg = parse_config(&small_config("adsgd")).unwrap();
    let cases = [DelayCase::Base, DelayCase::CommStraggler];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (da, _) = write_run_dir(a.path(), &cfg, &run_suite(&cfg, &cases).unwrap()).unwrap();
    let (db, _) = write_run_dir(b.path(), &cfg, &run_suite(&cfg, &cases).unwrap()).unwrap();
    let (fa, fb) = (files(&da), files(&db));
    assert!(fa.contains_key("metrics.csv"));
    assert!(fa.keys().any(|k| k.ends_with("trace.csv")));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between identical runs");
    }
}

#[test]
fn every_algorithm_stamps_its_artifacts() {
    for kind in AlgorithmKind::ALL {
        let cfg = parse_config(&small_config(kind.name())).unwrap();
        let results = run_suite(&cfg, &[DelayCase::Base]).unwrap();
        assert!(results.iter().all(|r| !r.diverged()), "{kind} diverged");
        let root = tempfile::tempdir().unwrap();
        let (dir, summary) = write_run_dir(root.path(), &cfg, &results).unwrap();
        assert_eq!(summary.config_hash, cfg.hash());
        let hashes = collect_hashes(&dir).unwrap();
        assert!(!hashes.is_empty());
        for (path, h) in &hashes {
            assert_eq!(h.as_deref(), Some(cfg.hash().as_str()), "{kind}: {path}");
        }
        let (hash, rows) = parse_metrics_csv(&std::fs::read_to_string(dir.join("metrics.csv")).unwrap()).unwrap();
        assert_eq!(hash.as_deref(), Some(cfg.hash().as_str()));
        let expected: usize = results.iter().map(|r| r.metrics.len()).sum();
        assert_eq!(rows.len(), expected);
        for (row, s) in rows.iter().zip(results.iter().flat_map(|r| r.metrics.iter())) {
            assert_eq!(&row.sample(), s);
            assert_eq!(row.algorithm, kind.name());
        }
    }
}

#[test]
fn trace_csv_round_trips() {
    let cfg = parse_config(&small_config("adsgd_mem_eff")).unwrap();
    for r in run_suite(&cfg, &DelayCase::TABLE).unwrap() {
        let text = r.trace.to_csv();
        let back = EventTrace::from_csv(&text).unwrap();
        assert_eq!(back, r.trace);
        assert_eq!(back.to_csv(), text);
    }
}

fn fingerprint<A: AsyncAlgorithm<Scalar = f64>>(alg: &A) -> u64 {
    let mut h = DefaultHasher::new();
    for i in 0..alg.n_agents() {
        for v in alg.iterate(i) {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

#[test]
fn sampling_metrics_leaves_the_run_untouched() {
    let top = build_topology(TopologyKind::Grid, 9).unwrap();
    let w = metropolis_weights(&top).unwrap();
    let qs = make_quadratic_with(&QuadraticSpec {
        noise_sigma2: 0.2,
        ..QuadraticSpec::new(9, 4, 2, 10.0)
    })
    .unwrap();
    let locals: Vec<Arc<dyn LocalProblem>> = qs.iter().map(|q| q.clone() as Arc<dyn LocalProblem>).collect();
    let objective = GlobalObjective::new(locals.clone());
    let oracles = || {
        locals
            .iter()
            .map(|p| Arc::new(ProblemOracle(p.clone())) as Arc<dyn GradientOracle<f64>>)
            .collect::<Vec<_>>()
    };
    let delays = preset_delay_model(DelayCase::SlowComm, 9, &PresetParams::default()).unwrap();
    let x0 = vec![vec![1.0, -1.0, 0.5, 0.0]; 9];

    let mut plain = Adsgd::new(&w, 0.05, oracles(), x0.clone(), 3).unwrap();
    let quiet = run_async(&top, &delays, 3, &mut plain, &EngineSettings::updates(500), |_, _, _| {}).unwrap();

    let mut observed = Adsgd::new(&w, 0.05, oracles(), x0, 3).unwrap();
    let mut samples = 0;
    let settings = EngineSettings::updates(500).with_stride(1);
    let loud = run_async(&top, &delays, 3, &mut observed, &settings, |t, k, a| {
        let before = fingerprint(a);
        let models: Vec<&[f64]> = (0..9).map(|i| a.iterate(i)).collect();
        metrics::sample(&objective, t, k, &models).unwrap();
        assert_eq!(fingerprint(a), before);
        samples += 1;
    })
    .unwrap();

    assert_eq!(samples, 501);
    assert_eq!(quiet.trace.to_csv(), loud.trace.to_csv());
    assert_eq!(fingerprint(&plain), fingerprint(&observed));
}
