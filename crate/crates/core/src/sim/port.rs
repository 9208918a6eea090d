use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// What happens when an agent commits a new version while an older one for
/// the same neighbor is still waiting for the port.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SendPolicy {
    /// The waiting job absorbs the newer payload and keeps its queue slot.
    #[default]
    Coalesce,
    /// Every version is transmitted; the queue may grow without bound.
    Backlog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortJob<M> {
    pub dst: usize,
    pub version: u64,
    pub payload: M,
}

/// Single outgoing port of one agent: jobs leave strictly one at a time.
#[derive(Clone, Debug)]
pub struct Port<M> {
    jobs: VecDeque<PortJob<M>>,
    busy: bool,
}

impl<M> Default for Port<M> {
    fn default() -> Self {
        Self {
            jobs: VecDeque::new(),
            busy: false,
        }
    }
}

impl<M> Port<M> {
    pub fn enqueue(&mut self, job: PortJob<M>, policy: SendPolicy, merge: impl FnOnce(&mut M, M)) {
        if policy == SendPolicy::Coalesce {
            if let Some(waiting) = self.jobs.iter_mut().find(|j| j.dst == job.dst) {
                merge(&mut waiting.payload, job.payload);
                waiting.version = job.version;
                return;
            }
        }
        self.jobs.push_back(job);
    }

    pub fn is_busy(&self) -> bool {
        self.busy
    }

    pub fn set_busy(&mut self, busy: bool) {
        self.busy = busy;
    }

    pub fn pop(&mut self) -> Option<PortJob<M>> {
        self.jobs.pop_front()
    }

    pub fn backlog(&self) -> usize {
        self.jobs.len()
    }
}
