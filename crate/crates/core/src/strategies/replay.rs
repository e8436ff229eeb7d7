//! Fixed-capacity experience replay.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

/// One transition. States are shared so consecutive rounds do not copy them.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience<T> {
    pub state: Arc<[T]>,
    pub action: usize,
    pub reward: T,
    pub next_state: Arc<[T]>,
}

/// Ring buffer; the oldest experience is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<Experience<T>>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity) }
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

    pub fn push(&mut self, e: Experience<T>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, index: usize) -> &Experience<T> {
        &self.items[index]
    }

    /// `batch` distinct indices, or `None` if the buffer is too small.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<usize>> {
        if self.items.len() < batch {
            return None;
        }
        Some(rand::seq::index::sample(rng, self.items.len(), batch).into_vec())
    }
}
