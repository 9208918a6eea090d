//! Event loop for asynchronous agents: compute, commit, multicast, repeat.

use serde::{Deserialize, Serialize};

use super::delay::DelayModel;
use super::port::{Port, PortJob, SendPolicy};
use super::queue::EventQueue;
use super::trace::{EventTrace, IterateLog, TraceMode, TraceRecord};
use crate::error::{LabError, Result};
use crate::graph::Topology;
use crate::rng::{stream, SimRng, StreamDomain};
use crate::vector::{ModelVector, Scalar};

/// An optimizer whose agents are driven by engine events.
pub trait AsyncAlgorithm {
    type Scalar: Scalar;
    type Message: Clone;

    fn n_agents(&self) -> usize;
    /// Payload of the broadcast performed at `t = 0`.
    fn initial_message(&self, agent: usize) -> Self::Message;
    fn on_compute_start(&mut self, agent: usize);
    /// Commits the pending update and returns what to multicast.
    fn on_compute_done(&mut self, agent: usize) -> Result<Self::Message>;
    fn on_arrival(&mut self, src: usize, dst: usize, version: u64, msg: Self::Message);
    /// Folds a newer payload into one still waiting on the port.
    fn coalesce(&self, pending: &mut Self::Message, newer: Self::Message);
    fn iterate(&self, agent: usize) -> &[Self::Scalar];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    Updates(u64),
    SimTime(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineSettings {
    pub budget: Budget,
    pub send_policy: SendPolicy,
    /// Virtual-index range `[start, end)` whose iterates are kept.
    pub iterate_window: Option<(u64, u64)>,
    /// Observer cadence in committed updates.
    pub metric_stride: u64,
    /// When false the returned trace is empty; sequence numbers still advance.
    pub record_trace: bool,
}

impl EngineSettings {
    pub fn updates(max: u64) -> Self {
        Self {
            budget: Budget::Updates(max),
            send_policy: SendPolicy::Coalesce,
            iterate_window: None,
            metric_stride: u64::MAX,
            record_trace: true,
        }
    }

    pub fn sim_time(max: f64) -> Self {
        Self {
            budget: Budget::SimTime(max),
            ..Self::updates(0)
        }
    }

    pub fn with_iterates(mut self) -> Self {
        self.iterate_window = Some((0, u64::MAX));
        self
    }

    pub fn with_iterate_window(mut self, start: u64, len: u64) -> Self {
        self.iterate_window = Some((start, start.saturating_add(len)));
        self
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.metric_stride = stride.max(1);
        self
    }

    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }

    pub fn with_policy(mut self, policy: SendPolicy) -> Self {
        self.send_policy = policy;
        self
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: EventTrace,
    pub end_time: f64,
    pub updates: u64,
    /// Set when the divergence detector aborted the run.
    pub divergence: Option<LabError>,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

enum Ev<M> {
    ComputeDone(usize),
    PortFree(usize),
    Arrival { src: usize, dst: usize, version: u64, payload: M },
}

/// Snapshots all models when the virtual index reaches the window start.
pub(crate) fn open_window<A: IterateSource>(log: &mut Option<IterateLog>, settings: &EngineSettings, updates: u64, alg: &A) {
    if let Some((start, _)) = settings.iterate_window {
        if log.is_none() && updates >= start {
            *log = Some(IterateLog {
                start_k: updates,
                initial: (0..alg.count()).map(|i| alg.model(i)).collect(),
                after_update: Vec::new(),
            });
        }
    }
}

pub(crate) fn record_iterate<S: Scalar>(log: &mut Option<IterateLog>, settings: &EngineSettings, k: u64, x: &[S]) {
    if let (Some(log), Some((_, end))) = (log.as_mut(), settings.iterate_window) {
        if k < end && k == log.end_k() {
            log.after_update.push(to_model(x));
        }
    }
}

/// Uniform access to agent models for iterate logging.
pub(crate) trait IterateSource {
    fn count(&self) -> usize;
    fn model(&self, i: usize) -> ModelVector;
}

impl<A: AsyncAlgorithm> IterateSource for A {
    fn count(&self) -> usize {
        self.n_agents()
    }
    fn model(&self, i: usize) -> ModelVector {
        to_model(self.iterate(i))
    }
}

pub(crate) fn to_model<S: Scalar>(x: &[S]) -> ModelVector {
    ModelVector::from_vec(x.iter().map(|v| v.to_f64_lossy()).collect())
}

struct Engine<'a, M> {
    topology: &'a Topology,
    delays: &'a DelayModel,
    policy: SendPolicy,
    queue: EventQueue<Ev<M>>,
    ports: Vec<Port<M>>,
    compute_rng: Vec<SimRng>,
    link_rng: Vec<SimRng>,
    trace: EventTrace,
    record: bool,
    seq: u64,
}

impl<M: Clone> Engine<'_, M> {
    fn emit(&mut self, record: impl FnOnce(u64) -> TraceRecord) {
        if self.record {
            self.trace.push(record(self.seq));
        }
        self.seq += 1;
    }

    fn multicast(&mut self, agent: usize, version: u64, payload: M, merge: &impl Fn(&mut M, M)) -> Result<()> {
        for &dst in self.topology.neighbors(agent) {
            let job = PortJob {
                dst,
                version,
                payload: payload.clone(),
            };
            self.ports[agent].enqueue(job, self.policy, |a, b| merge(a, b));
        }
        if !self.ports[agent].is_busy() {
            self.start_next_send(agent)?;
        }
        Ok(())
    }

    fn start_next_send(&mut self, src: usize) -> Result<()> {
        let Some(job) = self.ports[src].pop() else {
            self.ports[src].set_busy(false);
            return Ok(());
        };
        let n = self.topology.n();
        let now = self.queue.now();
        self.emit(|seq| TraceRecord::send_start(now, seq, src, job.dst, job.version));
        let occupancy = self.delays.link(src, job.dst)?.sample(&mut self.link_rng[src * n + job.dst]);
        self.queue.schedule(
            now + occupancy + self.delays.propagation(),
            Ev::Arrival {
                src,
                dst: job.dst,
                version: job.version,
                payload: job.payload,
            },
        )?;
        self.queue.schedule(now + occupancy, Ev::PortFree(src))?;
        self.ports[src].set_busy(true);
        Ok(())
    }

    fn start_compute<A: AsyncAlgorithm<Message = M>>(&mut self, alg: &mut A, agent: usize, version: u64) -> Result<()> {
        let now = self.queue.now();
        self.emit(|seq| TraceRecord::compute_start(now, seq, agent, version));
        alg.on_compute_start(agent);
        let d = self.delays.compute(agent).sample(&mut self.compute_rng[agent]);
        self.queue.schedule(now + d, Ev::ComputeDone(agent))?;
        Ok(())
    }
}

/// Runs `alg` on `topology` under `delays` until the budget is exhausted.
///
/// `observe(time, k, alg)` is called at `k = 0` and after every
/// `metric_stride`-th committed update.
pub fn run_async<A, F>(
    topology: &Topology,
    delays: &DelayModel,
    seed: u64,
    alg: &mut A,
    settings: &EngineSettings,
    mut observe: F,
) -> Result<RunOutcome>
where
    A: AsyncAlgorithm,
    F: FnMut(f64, u64, &A),
{
    let n = topology.n();
    if alg.n_agents() != n || delays.n() != n {
        return Err(LabError::Config(format!(
            "agent count mismatch: topology {n}, algorithm {}, delays {}",
            alg.n_agents(),
            delays.n()
        )));
    }
    let mut eng = Engine {
        topology,
        delays,
        policy: settings.send_policy,
        queue: EventQueue::new(),
        ports: (0..n).map(|_| Port::default()).collect(),
        compute_rng: (0..n).map(|i| stream(seed, StreamDomain::ComputeDelay, i as u64)).collect(),
        link_rng: (0..n * n).map(|l| stream(seed, StreamDomain::LinkDelay, l as u64)).collect(),
        trace: EventTrace::new(topology.neighbor_lists().to_vec(), TraceMode::Async),
        record: settings.record_trace,
        seq: 0,
    };
    let mut log = None;
    let mut versions = vec![0u64; n];
    observe(0.0, 0, alg);
    for i in 0..n {
        let msg = alg.initial_message(i);
        let coalesce = |p: &mut A::Message, m: A::Message| alg.coalesce(p, m);
        eng.multicast(i, 0, msg, &coalesce)?;
        eng.start_compute(alg, i, 0)?;
    }

    let mut updates = 0u64;
    let mut divergence = None;
    let done = |u: u64| matches!(settings.budget, Budget::Updates(m) if u >= m);
    if !done(0) {
        while let Some(ev) = eng.queue.next_event() {
            if let Budget::SimTime(limit) = settings.budget {
                if ev.time > limit {
                    break;
                }
            }
            match ev.event {
                Ev::ComputeDone(i) => {
                    open_window(&mut log, settings, updates, alg);
                    let msg = match alg.on_compute_done(i) {
                        Ok(m) => m,
                        Err(e @ LabError::Divergence { .. }) => {
                            divergence = Some(e);
                            break;
                        }
                        Err(e) => return Err(e),
                    };
                    versions[i] += 1;
                    updates += 1;
                    let v = versions[i];
                    eng.emit(|seq| TraceRecord::update(ev.time, seq, i, v));
                    record_iterate(&mut log, settings, updates - 1, alg.iterate(i));
                    if updates % settings.metric_stride == 0 {
                        observe(ev.time, updates, alg);
                    }
                    if done(updates) {
                        break;
                    }
                    let coalesce = |p: &mut A::Message, m: A::Message| alg.coalesce(p, m);
                    eng.multicast(i, versions[i], msg, &coalesce)?;
                    eng.start_compute(alg, i, versions[i])?;
                }
                Ev::PortFree(i) => eng.start_next_send(i)?,
                Ev::Arrival {
                    src,
                    dst,
                    version,
                    payload,
                } => {
                    eng.emit(|seq| TraceRecord::arrival(ev.time, seq, src, dst, version));
                    alg.on_arrival(src, dst, version, payload);
                }
            }
        }
    }
    let end_time = eng.queue.now();
    let mut trace = eng.trace;
    trace.iterates = log;
    Ok(RunOutcome {
        trace,
        end_time,
        updates,
        divergence,
    })
}
