use std::collections::HashMap;
use std::sync::Arc;

use adsgd_core::algorithms::{Adsgd, Asbcd, BlockGradientOracle, MemEffAdsgd, PenalizedConsensus, SingleBlock, SnapshotTiming};
use adsgd_core::graph::{build_topology, metropolis_weights, MixingMatrix, Topology, TopologyKind};
use adsgd_core::problems::{make_quadratic_with, GradientOracle, LocalProblem, OracleSet, ProblemOracle, QuadraticProblem, QuadraticSpec};
use adsgd_core::rng::{stream, SimRng, StreamDomain};
use adsgd_core::sim::{
    preset_delay_model, replay, run_async, AsyncAlgorithm, DelayCase, DelayModel, EngineSettings, PresetParams, SendPolicy,
    TraceKind,
};

fn quadratics(n: usize, seed: u64) -> Vec<Arc<QuadraticProblem>> {
    make_quadratic_with(&QuadraticSpec {
        noise_sigma2: 0.3,
        ..QuadraticSpec::new(n, 3, seed, 10.0)
    })
    .unwrap()
}

fn oracles(qs: &[Arc<QuadraticProblem>]) -> OracleSet<f64> {
    qs.iter()
        .map(|q| Arc::new(ProblemOracle(q.clone() as Arc<dyn LocalProblem>)) as Arc<dyn GradientOracle<f64>>)
        .collect()
}

fn start(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![1.0 - 0.3 * i as f64, 0.5, -0.2 * i as f64]).collect()
}

struct Zero(usize);

impl GradientOracle<f64> for Zero {
    fn dim(&self) -> usize {
        self.0
    }
    fn sample_gradient(&self, _: &[f64], _: &mut SimRng) -> Vec<f64> {
        vec![0.0; self.0]
    }
}

fn setting(case: DelayCase) -> (Topology, MixingMatrix, DelayModel) {
    let top = build_topology(TopologyKind::Grid, 9).unwrap();
    let w = metropolis_weights(&top).unwrap();
    let delays = preset_delay_model(case, 9, &PresetParams::default()).unwrap();
    (top, w, delays)
}

/// Runs `make()` through the engine, then replays the trace into a fresh
/// instance and compares every committed iterate bit for bit.
fn assert_replays<A: AsyncAlgorithm<Scalar = f64>>(make: impl Fn() -> A, case: DelayCase, policy: SendPolicy) {
    let (top, _, delays) = setting(case);
    let mut alg = make();
    let settings = EngineSettings::updates(400).with_iterates().with_policy(policy);
    let out = run_async(&top, &delays, 21, &mut alg, &settings, |_, _, _| {}).unwrap();
    let log = out.trace.iterates.clone().unwrap();
    let replayed = replay(&out.trace, &mut make(), policy, |_, _| {}).unwrap();
    assert_eq!(replayed.len(), log.after_update.len());
    for (k, (a, b)) in replayed.iter().zip(&log.after_update).enumerate() {
        assert_eq!(a.as_slice(), b.as_slice(), "{case:?}: update {k} differs");
    }
}

#[test]
fn replay_reproduces_every_variant() {
    let qs = quadratics(9, 3);
    let (_, w, _) = setting(DelayCase::Base);
    for case in DelayCase::TABLE {
        for policy in [SendPolicy::Coalesce, SendPolicy::Backlog] {
            assert_replays(|| Adsgd::new(&w, 0.05, oracles(&qs), start(9), 4).unwrap(), case, policy);
            assert_replays(|| MemEffAdsgd::new(&w, 0.05, oracles(&qs), start(9), 4).unwrap(), case, policy);
            assert_replays(|| Adsgd::double_step(&w, 0.1, 0.05, oracles(&qs), start(9), 4).unwrap(), case, policy);
            for timing in [SnapshotTiming::ComputeStart, SnapshotTiming::Commit] {
                assert_replays(
                    || {
                        let oracle: Arc<dyn BlockGradientOracle<f64>> =
                            Arc::new(PenalizedConsensus::oracle::<f64>(&w, 0.05, oracles(&qs)));
                        Asbcd::new(oracle, 0.05, start(9), timing, 4).unwrap()
                    },
                    case,
                    policy,
                );
            }
        }
    }
}

#[test]
fn memeff_sum_tracks_delivered_versions() {
    let qs = quadratics(9, 5);
    for case in DelayCase::TABLE {
        let (top, w, delays) = setting(case);
        let mut alg = MemEffAdsgd::new(&w, 0.05, oracles(&qs), start(9), 6).unwrap();
        let settings = EngineSettings::updates(600);
        let out = run_async(&top, &delays, 6, &mut alg, &settings, |_, _, _| {}).unwrap();

        let mut history: Vec<Vec<Vec<f64>>> = start(9).into_iter().map(|x| vec![x]).collect();
        let mut delivered: HashMap<(usize, usize), u64> = HashMap::new();
        let mut fresh = MemEffAdsgd::new(&w, 0.05, oracles(&qs), start(9), 6).unwrap();
        let mut checks = 0;
        replay(&out.trace, &mut fresh, SendPolicy::Coalesce, |r, a| {
            match r.kind {
                TraceKind::Update => {
                    assert_eq!(history[r.agent].len() as u64, r.version);
                    history[r.agent].push(a.iterate(r.agent).to_vec());
                }
                TraceKind::Arrival => {
                    delivered.insert((r.src.unwrap(), r.agent), r.version);
                    let i = r.agent;
                    let mut expect = vec![0.0; 3];
                    for &j in top.neighbors(i) {
                        let v = delivered.get(&(j, i)).copied().unwrap_or(0) as usize;
                        for (e, x) in expect.iter_mut().zip(&history[j][v]) {
                            *e += w.get(i, j) * x;
                        }
                    }
                    for (y, e) in a.state(i).y.iter().zip(&expect) {
                        assert!((y - e).abs() <= 1e-12 * (1.0 + e.abs()), "{case:?} seq {}: {y} vs {e}", r.seq);
                    }
                    checks += 1;
                }
                _ => {}
            }
        })
        .unwrap();
        assert!(checks > 0);
    }
}

#[test]
fn lockstep_gossip_conserves_mass() {
    let top = build_topology(TopologyKind::Ring, 7).unwrap();
    let w = metropolis_weights(&top).unwrap();
    let zero: OracleSet<f64> = (0..7).map(|_| Arc::new(Zero(3)) as Arc<dyn GradientOracle<f64>>).collect();
    let x0 = start(7);
    let mass = |xs: &[Vec<f64>]| (0..3).map(|c| xs.iter().map(|x| x[c]).sum::<f64>()).collect::<Vec<_>>();
    let before = mass(&x0);
    let mut alg = Adsgd::new(&w, 0.1, zero, x0, 0).unwrap();
    let delays = DelayModel::constant(7, 1.0, 0.0).unwrap();
    let out = run_async(&top, &delays, 0, &mut alg, &EngineSettings::updates(7 * 50).with_iterates(), |_, _, _| {}).unwrap();
    let log = out.trace.iterates.unwrap();
    for round in log.after_update.chunks(7) {
        let xs: Vec<Vec<f64>> = round.iter().map(|v| v.as_slice().to_vec()).collect();
        for (a, b) in mass(&xs).iter().zip(&before) {
            assert!((a - b).abs() <= 1e-12, "mass drifted: {a} vs {b}");
        }
    }
    let finals: Vec<Vec<f64>> = (0..7).map(|i| alg.iterate(i).to_vec()).collect();
    let spread = finals.iter().map(|x| (x[0] - before[0] / 7.0).abs()).fold(0.0, f64::max);
    assert!(spread < 1e-3, "no consensus after 50 rounds: {spread}");
}

#[test]
fn single_block_asbcd_is_sgd() {
    let q = quadratics(1, 8).remove(0);
    let oracle: Arc<dyn GradientOracle<f64>> = Arc::new(ProblemOracle(q.clone() as Arc<dyn LocalProblem>));
    let solo = Topology::from_edges(1, []).unwrap();
    let delays = preset_delay_model(DelayCase::CompStraggler, 1, &PresetParams::default()).unwrap();
    for timing in [SnapshotTiming::ComputeStart, SnapshotTiming::Commit] {
        let mut alg = Asbcd::new(Arc::new(SingleBlock(oracle.clone())), 0.05, vec![vec![2.0, -1.0, 0.5]], timing, 9).unwrap();
        let out = run_async(&solo, &delays, 9, &mut alg, &EngineSettings::updates(50).with_iterates(), |_, _, _| {}).unwrap();
        let log = out.trace.iterates.unwrap();
        let mut rng = stream(9, StreamDomain::GradientNoise, 0);
        let mut x = vec![2.0, -1.0, 0.5];
        for got in &log.after_update {
            let g = q.stochastic_gradient(&x, &mut rng);
            x = x.iter().zip(g.as_slice()).map(|(v, gc)| v - 0.05 * gc).collect();
            assert_eq!(got.as_slice(), x.as_slice());
        }
    }
}
