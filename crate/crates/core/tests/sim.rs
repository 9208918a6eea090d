use std::collections::BTreeMap;

use adsgd_core::graph::{build_topology, Topology, TopologyKind};
use adsgd_core::rng::{stream, StreamDomain};
use adsgd_core::sim::{
    preset_delay_model, run_async, AsyncAlgorithm, DelayCase, DelayModel, DelaySampler, DelayShape, EngineSettings,
    EventTrace, PresetParams, SendPolicy, TraceKind,
};
use adsgd_core::Result;
use proptest::prelude::*;

/// Schedule-only algorithm.
struct Probe(usize);

impl AsyncAlgorithm for Probe {
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

fn schedule(top: &Topology, delays: &DelayModel, seed: u64, policy: SendPolicy, updates: u64) -> EventTrace {
    let settings = EngineSettings::updates(updates).with_policy(policy);
    run_async(top, delays, seed, &mut Probe(top.n()), &settings, |_, _, _| {})
        .unwrap()
        .trace
}

fn topology(kind: u8, n: usize) -> Topology {
    let kind = match kind % 3 {
        0 => TopologyKind::Ring,
        1 => TopologyKind::Grid,
        _ => TopologyKind::Complete,
    };
    build_topology(kind, n).unwrap()
}

fn setup() -> impl Strategy<Value = (Topology, DelayModel, u64, SendPolicy)> {
    (0u8..3, 2usize..10, 0usize..5, any::<u64>(), any::<bool>()).prop_map(|(kind, n, case, seed, coalesce)| {
        let n = if kind % 3 == 1 { [4, 9][n % 2] } else { n.max(3) };
        let top = topology(kind, n);
        let delays = preset_delay_model(DelayCase::TABLE[case], n, &PresetParams::default()).unwrap();
        let policy = if coalesce { SendPolicy::Coalesce } else { SendPolicy::Backlog };
        (top, delays, seed, policy)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ordering_and_fifo((top, delays, seed, policy) in setup()) {
        let t = schedule(&top, &delays, seed, policy, 300);
        t.validate().unwrap();
        for w in t.records.windows(2) {
            prop_assert!(w[0].time <= w[1].time);
            prop_assert!(w[0].seq < w[1].seq);
        }
        let mut sent: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
        let mut arrived: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
        for r in &t.records {
            match r.kind {
                TraceKind::SendStart => sent.entry((r.agent, r.dst.unwrap())).or_default().push(r.version),
                TraceKind::Arrival => {
                    let src = r.src.unwrap();
                    prop_assert!(top.has_edge(src, r.agent));
                    arrived.entry((src, r.agent)).or_default().push(r.version);
                }
                _ => {}
            }
        }
        for (link, got) in &arrived {
            let s = &sent[link];
            prop_assert!(got.len() <= s.len());
            prop_assert_eq!(&s[..got.len()], &got[..]);
        }
    }

    #[test]
    fn compute_is_full_duplex_and_bounded((top, delays, seed, policy) in setup()) {
        let t = schedule(&top, &delays, seed, policy, 300);
        for i in 0..top.n() {
            let sampler = delays.compute(i);
            let (lo, hi) = sampler.support();
            let mut rng = stream(seed, StreamDomain::ComputeDelay, i as u64);
            let mut now = 0.0;
            for r in t.updates().filter(|r| r.agent == i) {
                let d = sampler.sample(&mut rng);
                prop_assert!((lo..=hi).contains(&d));
                now += d;
                prop_assert_eq!(r.time, now);
            }
        }
    }

    #[test]
    fn traces_are_a_function_of_the_seed((top, delays, seed, policy) in setup()) {
        let a = schedule(&top, &delays, seed, policy, 200).to_csv();
        let b = schedule(&top, &delays, seed, policy, 200).to_csv();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn link_occupancy_stays_in_support() {
    let top = topology(1, 9);
    for case in DelayCase::TABLE {
        let delays = preset_delay_model(case, 9, &PresetParams::default()).unwrap();
        let t = schedule(&top, &delays, 4, SendPolicy::Coalesce, 500);
        let mut open: BTreeMap<(usize, usize, u64), f64> = BTreeMap::new();
        for r in &t.records {
            match r.kind {
                TraceKind::SendStart => {
                    open.insert((r.agent, r.dst.unwrap(), r.version), r.time);
                }
                TraceKind::Arrival => {
                    let src = r.src.unwrap();
                    let start = open[&(src, r.agent, r.version)];
                    let (lo, hi) = delays.link(src, r.agent).unwrap().support();
                    let span = r.time - start;
                    assert!(span >= lo - 1e-9 && span <= hi + 1e-9, "{case:?}: {span} outside [{lo}, {hi}]");
                }
                _ => {}
            }
        }
    }
}

#[test]
fn sampler_mean_matches_the_truncated_integral() {
    for (mean, cv) in [(1.0, 0.25), (1.0, 0.5), (10.0, 0.5)] {
        let s = DelaySampler::truncated_lognormal(mean, cv, 0.2 * mean, 5.0 * mean).unwrap();
        let (lo, hi) = s.support();
        let steps = 200_000;
        let h = (hi - lo) / steps as f64;
        let (mut mass, mut first) = (0.0, 0.0);
        for k in 0..=steps {
            let x = lo + k as f64 * h;
            let wgt = if k == 0 || k == steps { 0.5 } else { 1.0 };
            mass += wgt * s.density(x) * h;
            first += wgt * x * s.density(x) * h;
        }
        let integral = first / mass;
        let mut rng = stream(11, StreamDomain::Auxiliary, 0);
        let empirical = (0..100_000).map(|_| s.sample(&mut rng)).sum::<f64>() / 100_000.0;
        assert!((empirical - integral).abs() <= 0.02 * integral, "{empirical} vs {integral}");
        assert!((empirical - mean).abs() <= 0.02 * mean, "{empirical} vs {mean}");
    }
}

#[test]
fn deterministic_shape_is_a_point_mass() {
    let s = DelayShape::deterministic().compute_sampler(2.5).unwrap();
    let mut rng = stream(0, StreamDomain::Auxiliary, 0);
    assert!((0..10).all(|_| s.sample(&mut rng) == 2.5));
}
