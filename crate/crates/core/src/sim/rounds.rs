//! Barrier-synchronized baselines: every agent computes, the network
//! exchanges, then all agents commit together.

use super::delay::DelayModel;
use super::engine::{record_iterate, to_model, Budget, EngineSettings, RunOutcome};
use super::trace::{EventTrace, IterateLog, TraceMode, TraceRecord};
use crate::error::{LabError, Result};
use crate::graph::Topology;
use crate::rng::{stream, StreamDomain};

/// How a round's communication is organized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exchange {
    /// Each agent sends its model to every neighbor through its serial port.
    Neighbors,
    /// Ring all-reduce over agents in id order: `2(n−1)` phases of chunks of size `1/n`.
    RingAllReduce,
}

pub trait RoundAlgorithm {
    fn n_agents(&self) -> usize;
    fn exchange(&self) -> Exchange;
    /// Computes all gradients, mixes, and commits every agent's update.
    fn round(&mut self) -> Result<()>;
    fn iterate(&self, agent: usize) -> &[f64];
}

/// Duration of the communication part of a round starting from a barrier.
/// Returns `(duration, message records relative to the barrier)`.
fn exchange_timing(
    kind: Exchange,
    topology: &Topology,
    delays: &DelayModel,
    link_rng: &mut [crate::rng::SimRng],
) -> Result<(f64, Vec<(f64, f64, usize, usize)>)> {
    let n = topology.n();
    let mut messages = Vec::new();
    let mut span: f64 = 0.0;
    match kind {
        Exchange::Neighbors => {
            for src in 0..n {
                let mut port = 0.0;
                for &dst in topology.neighbors(src) {
                    let start = port;
                    port += delays.link(src, dst)?.sample(&mut link_rng[src * n + dst]);
                    let arrive = port + delays.propagation();
                    messages.push((start, arrive, src, dst));
                    span = span.max(arrive);
                }
            }
        }
        Exchange::RingAllReduce => {
            if n > 1 {
                for _ in 0..2 * (n - 1) {
                    let mut phase: f64 = 0.0;
                    for src in 0..n {
                        let dst = (src + 1) % n;
                        let t = delays.link(src, dst)?.sample(&mut link_rng[src * n + dst]) / n as f64;
                        phase = phase.max(t + delays.propagation());
                    }
                    span += phase;
                }
            }
        }
    }
    Ok((span, messages))
}

/// Runs a synchronous baseline. Compute draws come from the same per-agent
/// streams as the asynchronous engine.
pub fn run_rounds<A, F>(
    topology: &Topology,
    delays: &DelayModel,
    seed: u64,
    alg: &mut A,
    settings: &EngineSettings,
    mut observe: F,
) -> Result<RunOutcome>
where
    A: RoundAlgorithm,
    F: FnMut(f64, u64, &A),
{
    let n = topology.n();
    if alg.n_agents() != n || delays.n() != n {
        return Err(LabError::Config("agent count mismatch between topology, algorithm and delays".into()));
    }
    let mode = match alg.exchange() {
        Exchange::Neighbors => TraceMode::Rounds,
        Exchange::RingAllReduce => TraceMode::Replicated,
    };
    let mut trace = EventTrace::new(topology.neighbor_lists().to_vec(), mode);
    let mut compute_rng: Vec<_> = (0..n).map(|i| stream(seed, StreamDomain::ComputeDelay, i as u64)).collect();
    let mut link_rng: Vec<_> = (0..n * n).map(|l| stream(seed, StreamDomain::LinkDelay, l as u64)).collect();
    let mut log: Option<IterateLog> = None;

    let mut now = 0.0;
    let mut round = 0u64;
    let mut updates = 0u64;
    let mut divergence = None;
    observe(0.0, 0, alg);
    loop {
        if let Budget::Updates(m) = settings.budget {
            if updates + n as u64 > m {
                break;
            }
        }
        let slowest = compute_rng
            .iter_mut()
            .enumerate()
            .map(|(i, rng)| delays.compute(i).sample(rng))
            .fold(0.0, f64::max);
        let barrier = now + slowest;
        let (span, mut messages) = exchange_timing(alg.exchange(), topology, delays, &mut link_rng)?;
        let end = barrier + span;
        if let Budget::SimTime(limit) = settings.budget {
            if end > limit {
                break;
            }
        }
        if let Some((start, _)) = settings.iterate_window {
            if log.is_none() && updates >= start {
                log = Some(IterateLog {
                    start_k: updates,
                    initial: (0..n).map(|i| to_model(alg.iterate(i))).collect(),
                    after_update: Vec::new(),
                });
            }
        }
        for i in 0..n {
            let seq = trace.next_seq();
            trace.push(TraceRecord::compute_start(now, seq, i, round));
        }
        messages.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut events: Vec<(f64, u8, TraceRecord)> = Vec::new();
        for (start, arrive, src, dst) in messages {
            events.push((barrier + start, 0, TraceRecord::send_start(0.0, 0, src, dst, round)));
            events.push((barrier + arrive, 1, TraceRecord::arrival(0.0, 0, src, dst, round)));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (t, _, mut r) in events {
            r.time = t;
            r.seq = trace.next_seq();
            trace.push(r);
        }
        if let Err(e) = alg.round() {
            if matches!(e, LabError::Divergence { .. }) {
                divergence = Some(e);
                now = end;
                break;
            }
            return Err(e);
        }
        round += 1;
        for i in 0..n {
            let seq = trace.next_seq();
            trace.push(TraceRecord::update(end, seq, i, round));
            record_iterate(&mut log, settings, updates + i as u64, alg.iterate(i));
        }
        let before = updates;
        updates += n as u64;
        now = end;
        if updates / settings.metric_stride > before / settings.metric_stride {
            observe(now, updates, alg);
        }
    }
    trace.iterates = log;
    Ok(RunOutcome {
        trace,
        end_time: now,
        updates,
        divergence,
    })
}
