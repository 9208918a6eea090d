use std::collections::{HashMap, VecDeque};

use super::engine::AsyncAlgorithm;
use super::port::{Port, PortJob, SendPolicy};
use super::trace::{EventTrace, TraceKind, TraceMode, TraceRecord};
use crate::error::{LabError, Result};

/// Drives `alg` through the records of an asynchronous trace, mirroring the
/// engine's port queues so coalesced payloads are rebuilt identically.
/// `hook` runs after every record. Returns the active agent's iterate after
/// each update, in update order.
pub fn replay<A, H>(trace: &EventTrace, alg: &mut A, policy: SendPolicy, mut hook: H) -> Result<Vec<Vec<A::Scalar>>>
where
    A: AsyncAlgorithm,
    H: FnMut(&TraceRecord, &A),
{
    if trace.mode != TraceMode::Async {
        return Err(LabError::Trace("only asynchronous traces can be replayed event by event".into()));
    }
    let n = trace.n_agents;
    if alg.n_agents() != n {
        return Err(LabError::Trace(format!(
            "trace has {n} agents, algorithm has {}",
            alg.n_agents()
        )));
    }
    let mut ports: Vec<Port<A::Message>> = (0..n).map(|_| Port::default()).collect();
    let mut in_flight: HashMap<(usize, usize), VecDeque<PortJob<A::Message>>> = HashMap::new();
    let enqueue_all = |ports: &mut Vec<Port<A::Message>>, alg: &A, src: usize, version: u64, msg: A::Message| {
        for &dst in &trace.neighbors[src] {
            let job = PortJob {
                dst,
                version,
                payload: msg.clone(),
            };
            ports[src].enqueue(job, policy, |p, m| alg.coalesce(p, m));
        }
    };
    for i in 0..n {
        let msg = alg.initial_message(i);
        enqueue_all(&mut ports, alg, i, 0, msg);
    }
    let mut out = Vec::new();
    for r in &trace.records {
        match r.kind {
            TraceKind::ComputeStart => alg.on_compute_start(r.agent),
            TraceKind::Update => {
                let msg = alg.on_compute_done(r.agent)?;
                out.push(alg.iterate(r.agent).to_vec());
                enqueue_all(&mut ports, alg, r.agent, r.version, msg);
            }
            TraceKind::SendStart => {
                let (src, dst) = (r.agent, r.dst.unwrap_or(usize::MAX));
                let job = ports[src]
                    .pop()
                    .ok_or_else(|| LabError::Trace(format!("send seq {} from an empty port", r.seq)))?;
                if job.dst != dst || job.version != r.version {
                    return Err(LabError::Trace(format!(
                        "send seq {} is {}→{dst} v{}, but the port holds →{} v{} (send policy mismatch?)",
                        r.seq, src, r.version, job.dst, job.version
                    )));
                }
                in_flight.entry((src, dst)).or_default().push_back(job);
            }
            TraceKind::Arrival => {
                let src = r.src.unwrap_or(usize::MAX);
                let job = in_flight
                    .get_mut(&(src, r.agent))
                    .and_then(|q| q.pop_front())
                    .ok_or_else(|| LabError::Trace(format!("arrival seq {} without a matching send", r.seq)))?;
                if job.version != r.version {
                    return Err(LabError::Trace(format!("arrival seq {} breaks link FIFO order", r.seq)));
                }
                alg.on_arrival(src, r.agent, r.version, job.payload);
            }
        }
        hook(r, alg);
    }
    Ok(out)
}
