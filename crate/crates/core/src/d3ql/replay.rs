use rand::Rng;

use super::D3qlError;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity.min(4096)),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a transition, overwriting the oldest one once full.
    pub fn push(&mut self, transition: Transition) {
        if self.entries.len() < self.capacity {
            self.entries.push(transition);
        } else {
            self.entries[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.entries.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.entries[split..].iter().chain(&self.entries[..split])
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>, D3qlError> {
        if batch_size == 0 || batch_size > self.entries.len() {
            return Err(D3qlError::InsufficientEntries {
                requested: batch_size,
                available: self.entries.len(),
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.entries[rng.gen_range(0..self.entries.len())])
            .collect())
    }

    /// Same draw as [`Self::sample`], returning indices into storage order.
    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, D3qlError> {
        if batch_size == 0 || batch_size > self.entries.len() {
            return Err(D3qlError::InsufficientEntries {
                requested: batch_size,
                available: self.entries.len(),
            });
        }
        Ok((0..batch_size)
            .map(|_| rng.gen_range(0..self.entries.len()))
            .collect())
    }

    pub(crate) fn get(&self, index: usize) -> &Transition {
        &self.entries[index]
    }
}
