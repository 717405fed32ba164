use rand::seq::index;

use super::demo::Transition;
use crate::rng::StreamRng;

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once the buffer is full.
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (head, tail) = self.items.split_at(self.next);
        tail.iter().chain(head)
    }

    /// `n` distinct transitions, uniformly; `None` if fewer are stored.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Option<Vec<&Transition>> {
        sample_distinct(&self.items, n, rng)
    }
}

pub(crate) fn sample_distinct<'a>(pool: &'a [Transition], n: usize, rng: &mut StreamRng) -> Option<Vec<&'a Transition>> {
    (n <= pool.len()).then(|| index::sample(rng, pool.len(), n).into_iter().map(|i| &pool[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::TransitionSource;
    use crate::rng::{stream_rng, Stream};

    fn t(r: f64) -> Transition {
        Transition { obs: vec![], action: 0, reward: r, next_obs: vec![], terminal: false, source: TransitionSource::Online }
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(i as f64));
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, [2.0, 3.0, 4.0]);
    }

    #[test]
    fn sample_is_without_replacement() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..10 {
            buf.push(t(i as f64));
        }
        let mut rng = stream_rng(1, Stream::ReplaySampling, 0);
        for _ in 0..100 {
            let mut got: Vec<i64> = buf.sample(10, &mut rng).unwrap().iter().map(|t| t.reward as i64).collect();
            got.sort();
            assert_eq!(got, (0..10).collect::<Vec<_>>());
        }
        assert!(buf.sample(11, &mut rng).is_none());
    }
}
