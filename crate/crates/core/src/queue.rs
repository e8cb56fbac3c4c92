//! Max-priority queue with first-in-first-out tie breaking.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::hash::Hash;

#[derive(Debug, Clone)]
struct Entry<T> {
    priority: f64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Entry<T> {}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Entry<T> {
    // Higher priority first; among equals, the earlier push.
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Pops the highest priority first; equal priorities come out in push order.
///
/// Items may optionally carry a key. A keyed push replaces a queued item
/// with the same key when its priority is higher (and is dropped otherwise),
/// so each key is queued at most once.
#[derive(Debug, Clone)]
pub struct PrioritizedQueue<T, K = ()> {
    heap: BinaryHeap<Entry<(T, Option<K>)>>,
    next_seq: u64,
    // key -> seq of the live entry for it; stale heap entries are skipped on pop
    live: HashMap<K, (u64, f64)>,
    stale: usize,
}

impl<T, K: Eq + Hash + Clone> Default for PrioritizedQueue<T, K> {
    fn default() -> Self {
        PrioritizedQueue { heap: BinaryHeap::new(), next_seq: 0, live: HashMap::new(), stale: 0 }
    }
}

impl<T, K: Eq + Hash + Clone> PrioritizedQueue<T, K> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of queued items.
    pub fn len(&self) -> usize {
        self.heap.len() - self.stale
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, item: T, priority: f64) {
        assert!(!priority.is_nan(), "NaN priority");
        let seq = self.bump();
        self.heap.push(Entry { priority, seq, item: (item, None) });
    }

    /// Keyed push; returns whether the item was queued.
    pub fn push_keyed(&mut self, key: K, item: T, priority: f64) -> bool {
        assert!(!priority.is_nan(), "NaN priority");
        if let Some(&(_, old)) = self.live.get(&key) {
            if priority <= old {
                return false;
            }
            self.stale += 1;
        }
        let seq = self.bump();
        self.live.insert(key.clone(), (seq, priority));
        self.heap.push(Entry { priority, seq, item: (item, Some(key)) });
        true
    }

    fn bump(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    pub fn pop(&mut self) -> Option<(T, f64)> {
        while let Some(Entry { priority, seq, item: (item, key) }) = self.heap.pop() {
            match key {
                None => return Some((item, priority)),
                Some(k) => {
                    if self.live.get(&k).is_some_and(|&(s, _)| s == seq) {
                        self.live.remove(&k);
                        return Some((item, priority));
                    }
                    self.stale -= 1;
                }
            }
        }
        None
    }

    pub fn peek_priority(&self) -> Option<f64> {
        self.heap
            .iter()
            .filter(|e| e.item.1.as_ref().is_none_or(|k| self.live.get(k).is_some_and(|&(s, _)| s == e.seq)))
            .map(|e| e.priority)
            .max_by(f64::total_cmp)
    }

    pub fn clear(&mut self) {
        self.heap.clear();
        self.live.clear();
        self.stale = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_first_fifo_ties() {
        let mut q: PrioritizedQueue<&str> = PrioritizedQueue::new();
        q.push("a", 0.5);
        q.push("b", 0.9);
        q.push("c", 0.5);
        q.push("d", 0.0);
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(x, _)| x)).collect();
        assert_eq!(order, ["b", "a", "c", "d"]);
        assert!(q.is_empty());
    }

    #[test]
    fn keyed_push_keeps_max() {
        let mut q: PrioritizedQueue<u32, u8> = PrioritizedQueue::new();
        assert!(q.push_keyed(1, 10, 0.2));
        assert!(!q.push_keyed(1, 11, 0.1));
        assert!(q.push_keyed(1, 12, 0.7));
        q.push_keyed(2, 20, 0.5);
        assert_eq!(q.len(), 2);
        assert_eq!(q.peek_priority(), Some(0.7));
        assert_eq!(q.pop(), Some((12, 0.7)));
        assert_eq!(q.pop(), Some((20, 0.5)));
        assert_eq!(q.pop(), None);
        // key is free again once popped
        assert!(q.push_keyed(1, 13, 0.01));
    }
}
