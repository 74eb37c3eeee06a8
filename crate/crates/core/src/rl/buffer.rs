//! FIFO replay buffer with uniform without-replacement batch sampling.

use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;

use super::nn::Mat;

#[derive(Debug, Clone)]
pub struct Transition {
    pub features: Mat<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_features: Mat<f64>,
    pub done: bool,
}

#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer { capacity, slots: Vec::with_capacity(capacity.min(4096)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.slots.len() < self.capacity {
            self.slots.push(transition);
        } else {
            self.slots[self.next] = transition;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    /// Uniform sample without replacement within the batch; the batch size
    /// is clipped to the current fill level.
    pub fn sample<'a>(&'a self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<&'a Transition> {
        let take = batch.min(self.slots.len());
        index_sample(rng, self.slots.len(), take).into_iter().map(|i| &self.slots[i]).collect()
    }
}
