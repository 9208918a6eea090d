use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{LabError, Result};

/// An event popped from the queue, ordered by `(time, seq)`.
#[derive(Debug, Clone)]
pub struct Scheduled<E> {
    pub time: f64,
    pub seq: u64,
    pub event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<E> Eq for Scheduled<E> {}
impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Scheduled<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

/// Min-queue over `(time, seq)` with a global monotone sequence counter.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Scheduled<E>>>,
    now: f64,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: 0.0,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Reserves a sequence number for an action taken inline at the current time.
    pub fn allocate_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    pub fn schedule(&mut self, time: f64, event: E) -> Result<u64> {
        if !(time >= self.now) {
            return Err(LabError::ScheduleInPast {
                event_time: time,
                now: self.now,
            });
        }
        let seq = self.allocate_seq();
        self.heap.push(Reverse(Scheduled { time, seq, event }));
        Ok(seq)
    }

    /// Pops the global minimum and advances the clock; `None` ends the simulation.
    pub fn next_event(&mut self) -> Option<Scheduled<E>> {
        let Reverse(ev) = self.heap.pop()?;
        self.now = ev.time;
        Some(ev)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamDomain};
    use rand::Rng;

    #[test]
    fn equal_times_pop_in_seq_order() {
        let mut q = EventQueue::new();
        q.schedule(1.0, "a").unwrap();
        q.schedule(1.0, "b").unwrap();
        assert_eq!(q.next_event().unwrap().event, "a");
        assert_eq!(q.next_event().unwrap().event, "b");
        assert!(q.next_event().is_none());
    }

    #[test]
    fn past_schedule_is_rejected() {
        let mut q = EventQueue::new();
        q.schedule(2.0, ()).unwrap();
        q.next_event();
        assert!(matches!(q.schedule(1.0, ()), Err(LabError::ScheduleInPast { .. })));
        assert!(q.schedule(2.0, ()).is_ok());
    }

    #[test]
    fn interleaved_random_events_are_sorted() {
        let mut rng = stream(42, StreamDomain::Auxiliary, 0);
        let mut q = EventQueue::new();
        let mut popped = Vec::new();
        let mut pushed = Vec::new();
        for i in 0..10_000u32 {
            let t = q.now() + rng.gen_range(0.0..5.0);
            q.schedule(t, i).unwrap();
            pushed.push(t);
            if rng.gen_bool(0.4) {
                popped.push(q.next_event().unwrap().time);
            }
        }
        while let Some(e) = q.next_event() {
            popped.push(e.time);
        }
        assert!(popped.windows(2).all(|w| w[0] <= w[1]));
        pushed.sort_by(f64::total_cmp);
        popped.sort_by(f64::total_cmp);
        assert_eq!(pushed, popped);
    }
}
