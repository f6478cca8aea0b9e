use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    factor: usize,
    version: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.factor.cmp(&other.factor))
            .then(self.version.cmp(&other.version))
    }
}

/// Min-queue of candidate bounce times with lazy deletion.
///
/// Rescheduling a factor bumps its version; older entries stay in the heap
/// and are dropped when they surface.
#[derive(Debug, Clone)]
pub(crate) struct EventQueue {
    heap: BinaryHeap<Reverse<Entry>>,
    version: Vec<u64>,
    scheduled: Vec<f64>,
    pub pushes: u64,
    pub pops: u64,
    pub stale_pops: u64,
}

impl EventQueue {
    pub fn new(num_factors: usize) -> Self {
        EventQueue {
            heap: BinaryHeap::with_capacity(num_factors),
            version: vec![0; num_factors],
            scheduled: vec![f64::INFINITY; num_factors],
            pushes: 0,
            pops: 0,
            stale_pops: 0,
        }
    }

    /// Replaces the candidate time of `factor`. Infinite times are not stored.
    pub fn schedule(&mut self, factor: usize, time: f64) {
        self.version[factor] += 1;
        self.scheduled[factor] = time;
        if time.is_finite() {
            self.heap.push(Reverse(Entry { time, factor, version: self.version[factor] }));
            self.pushes += 1;
        }
    }

    /// Earliest current entry, discarding stale ones on the way.
    pub fn peek(&mut self) -> Option<(f64, usize)> {
        while let Some(Reverse(top)) = self.heap.peek() {
            if top.version == self.version[top.factor] {
                return Some((top.time, top.factor));
            }
            self.heap.pop();
            self.pops += 1;
            self.stale_pops += 1;
        }
        None
    }

    pub fn pop(&mut self) -> Option<(f64, usize)> {
        let next = self.peek()?;
        self.heap.pop();
        self.pops += 1;
        Some(next)
    }

    pub fn scheduled(&self) -> &[f64] {
        &self.scheduled
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stale_entries_are_skipped() {
        let mut q = EventQueue::new(3);
        q.schedule(0, 1.0);
        q.schedule(1, 0.5);
        q.schedule(2, 2.0);
        q.schedule(1, 3.0);
        q.schedule(2, f64::INFINITY);
        assert_eq!(q.pop(), Some((1.0, 0)));
        assert_eq!(q.pop(), Some((3.0, 1)));
        assert_eq!(q.pop(), None);
        assert_eq!(q.stale_pops, 2);
        assert_eq!(q.scheduled()[2], f64::INFINITY);
    }

    #[test]
    fn ties_break_by_factor() {
        let mut q = EventQueue::new(2);
        q.schedule(1, 1.0);
        q.schedule(0, 1.0);
        assert_eq!(q.pop(), Some((1.0, 0)));
    }
}
