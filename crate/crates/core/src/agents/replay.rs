use rand::Rng;

use crate::env::{ACT_DIM, OBS_DIM};
use crate::error::{DockError, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f32; OBS_DIM],
    pub action: [f32; ACT_DIM],
    pub reward: f32,
    pub next_state: [f32; OBS_DIM],
    /// True only for Goal/Violation; false at time-limit truncation.
    pub terminal: bool,
}

/// Column-stacked minibatch.
#[derive(Debug, Clone)]
pub struct ReplayBatch {
    pub states: Matrix<f32>,
    pub actions: Matrix<f32>,
    pub rewards: Vec<f32>,
    pub next_states: Matrix<f32>,
    pub terminals: Vec<bool>,
}

impl ReplayBatch {
    pub fn from_transitions(items: &[Transition]) -> Self {
        let n = items.len();
        let mut states = Vec::with_capacity(n * OBS_DIM);
        let mut next_states = Vec::with_capacity(n * OBS_DIM);
        let mut actions = Vec::with_capacity(n * ACT_DIM);
        for t in items {
            states.extend_from_slice(&t.state);
            next_states.extend_from_slice(&t.next_state);
            actions.extend_from_slice(&t.action);
        }
        ReplayBatch {
            states: Matrix::from_vec(n, OBS_DIM, states).expect("sized"),
            actions: Matrix::from_vec(n, ACT_DIM, actions).expect("sized"),
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: Matrix::from_vec(n, OBS_DIM, next_states).expect("sized"),
            terminals: items.iter().map(|t| t.terminal).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring buffer; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            items: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored transitions, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Uniform sample with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, batch_size: usize) -> Result<Vec<usize>> {
        if self.items.len() < batch_size || batch_size == 0 {
            return Err(DockError::Usage(format!(
                "cannot sample {batch_size} transitions from a buffer holding {}",
                self.items.len()
            )));
        }
        Ok((0..batch_size).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch_size: usize) -> Result<ReplayBatch> {
        let idx = self.sample_indices(rng, batch_size)?;
        let picked: Vec<Transition> = idx.iter().map(|&i| self.items[i]).collect();
        Ok(ReplayBatch::from_transitions(&picked))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(tag: f32) -> Transition {
        Transition {
            state: [tag; OBS_DIM],
            action: [0.0; ACT_DIM],
            reward: tag,
            next_state: [tag; OBS_DIM],
            terminal: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(2);
        for tag in [1.0, 2.0, 3.0] {
            b.push(tr(tag));
        }
        let held: Vec<f32> = b.iter_oldest_first().map(|t| t.reward).collect();
        assert_eq!(held, vec![2.0, 3.0]);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn underfilled_sample_is_usage_error() {
        let mut b = ReplayBuffer::new(10);
        b.push(tr(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample(&mut rng, 2), Err(DockError::Usage(_))));
    }

    #[test]
    fn full_support_when_batch_equals_size() {
        let mut b = ReplayBuffer::new(4);
        for tag in 0..4 {
            b.push(tr(tag as f32));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = [false; 4];
        for _ in 0..200 {
            for i in b.sample_indices(&mut rng, 4).unwrap() {
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn uniform_frequencies() {
        let mut b = ReplayBuffer::new(10);
        for tag in 0..10 {
            b.push(tr(tag as f32));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            for i in b.sample_indices(&mut rng, 10).unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / 100_000.0;
            assert!((freq - 0.1).abs() <= 0.005, "frequency {freq}");
        }
    }

    #[test]
    fn batch_layout() {
        let batch = ReplayBatch::from_transitions(&[tr(1.0), tr(2.0)]);
        assert_eq!(batch.states.rows(), 2);
        assert_eq!(batch.states.row(1), &[2.0; OBS_DIM]);
        assert_eq!(batch.rewards, vec![1.0, 2.0]);
    }
}
