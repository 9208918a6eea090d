//! Hand-built three-agent traces where one agent reads a stale copy of
//! agent 0. Agent 1 is the reader, agent 2 a filler that only advances `k`.

use crate::sim::{EventTrace, TraceMode, TraceRecord};

pub const READER: usize = 1;

struct Builder {
    trace: EventTrace,
    versions: [u64; 3],
}

impl Builder {
    fn new() -> Self {
        let nbrs = (0..3).map(|i| (0..3).filter(|&j| j != i).collect()).collect();
        Self {
            trace: EventTrace::new(nbrs, TraceMode::Async),
            versions: [0; 3],
        }
    }

    fn start(&mut self, time: f64, agent: usize) {
        let seq = self.trace.next_seq();
        let v = self.versions[agent];
        self.trace.push(TraceRecord::compute_start(time, seq, agent, v));
    }

    /// Update number `k` commits at time `k + 1`.
    fn update(&mut self, k: u64, agent: usize) {
        self.versions[agent] += 1;
        let seq = self.trace.next_seq();
        let v = self.versions[agent];
        self.trace.push(TraceRecord::update(k as f64 + 1.0, seq, agent, v));
    }

    /// Start-then-commit for agents other than the reader.
    fn step(&mut self, k: u64, agent: usize) {
        self.start(k as f64 + 0.5, agent);
        self.update(k, agent);
    }

    fn deliver(&mut self, time: f64, version: u64) {
        let seq = self.trace.next_seq();
        self.trace.push(TraceRecord::arrival(time, seq, 0, READER, version));
    }
}

/// Agent 0 updates at `k = 0, 5, 10`, the reader at `4, 9`. The reader's
/// second computation starts before `k = 5` and the `k = 5` copy lands
/// before `k = 9`: stale-at-start `s = 5`, at commit `s = 9`.
pub fn stale_read_overtaken() -> EventTrace {
    let mut b = Builder::new();
    b.step(0, 0);
    b.deliver(1.5, 1);
    b.step(1, 2);
    b.start(2.3, READER);
    b.step(2, 2);
    b.step(3, 2);
    b.update(4, READER);
    b.start(5.2, READER);
    b.step(5, 0);
    b.step(6, 2);
    b.step(7, 2);
    b.deliver(8.2, 2);
    b.step(8, 2);
    b.update(9, READER);
    b.step(10, 0);
    b.trace
}

/// Agent 0 updates at `k = 0, 3, 8`, the reader at `4, 9`. The `k = 3` copy
/// lands after the reader's second start, the `k = 8` copy after `k = 9`:
/// stale-at-start `s = 3`, at commit `s = 8`.
pub fn stale_read_delayed() -> EventTrace {
    let mut b = Builder::new();
    b.step(0, 0);
    b.deliver(1.5, 1);
    b.step(1, 2);
    b.start(2.3, READER);
    b.step(2, 2);
    b.step(3, 0);
    b.update(4, READER);
    b.start(5.2, READER);
    b.step(5, 2);
    b.step(6, 2);
    b.deliver(7.2, 2);
    b.step(7, 2);
    b.step(8, 0);
    b.update(9, READER);
    b.step(10, 2);
    b.deliver(11.5, 3);
    b.trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{compute_s_adsgd, compute_s_asbcd, measure_bounds, reconstruct_virtual_index};

    #[test]
    fn fixtures_are_valid_and_ordered() {
        for t in [stale_read_overtaken(), stale_read_delayed()] {
            t.validate().unwrap();
            assert_eq!(reconstruct_virtual_index(&t).unwrap().len(), 11);
        }
    }

    #[test]
    fn overtaken_copy() {
        let t = stale_read_overtaken();
        assert_eq!(compute_s_asbcd(&t, 9, READER, 0).unwrap(), 5);
        assert_eq!(compute_s_asbcd(&t, 4, READER, 0).unwrap(), 4);
        assert_eq!(compute_s_adsgd(&t, 9, READER, 0).unwrap(), 9);
        assert_eq!(compute_s_adsgd(&t, 9, READER, READER).unwrap(), 9);
    }

    #[test]
    fn delayed_copy() {
        let t = stale_read_delayed();
        assert_eq!(compute_s_asbcd(&t, 9, READER, 0).unwrap(), 3);
        assert_eq!(compute_s_asbcd(&t, 4, READER, 0).unwrap(), 3);
        assert_eq!(compute_s_adsgd(&t, 9, READER, 0).unwrap(), 8);
    }

    #[test]
    fn wrong_agent_is_an_error() {
        assert!(compute_s_adsgd(&stale_read_delayed(), 9, 0, 1).is_err());
    }

    #[test]
    fn bounds_are_finite() {
        let b = measure_bounds(&stale_read_delayed()).unwrap();
        assert_eq!(b.b_measured, 5);
        assert!(b.d_asbcd >= 6);
    }
}
