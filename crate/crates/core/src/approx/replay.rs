//! Bounded FIFO experience store with uniform batch sampling.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::stochmax::{sample_distinct, ActionId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig(
                "replay capacity must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> + '_ {
        self.items.iter()
    }

    /// Actions of the stored experiences, oldest first.
    pub fn actions(&self) -> Vec<ActionId> {
        self.items.iter().map(|e| e.action).collect()
    }

    /// `batch` distinct positions drawn uniformly from the current contents.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Result<Vec<usize>> {
        if batch == 0 || batch > self.items.len() {
            return Err(Error::InvalidParams(format!(
                "batch {batch} from a buffer holding {}",
                self.items.len()
            )));
        }
        let mut idx = Vec::with_capacity(batch);
        sample_distinct(rng, self.items.len(), batch, &mut idx);
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(i: usize) -> Experience {
        Experience {
            state: vec![i as f64],
            action: ActionId(i),
            reward: 0.0,
            next_state: vec![],
            terminal: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let cap = 18;
        let mut buf = ReplayBuffer::new(cap).unwrap();
        for i in 0..cap + 5 {
            buf.push(exp(i));
            assert!(buf.len() <= cap);
        }
        let held: Vec<usize> = buf.actions().iter().map(|a| a.index()).collect();
        assert_eq!(held, (5..cap + 5).collect::<Vec<_>>());
    }

    #[test]
    fn batches_are_distinct_and_uniform() {
        let mut buf = ReplayBuffer::new(18).unwrap();
        for i in 0..18 {
            buf.push(exp(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0usize; 18];
        let rounds = 60_000;
        for _ in 0..rounds {
            let mut idx = buf.sample_indices(&mut rng, 9).unwrap();
            for &i in &idx {
                counts[i] += 1;
            }
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 9);
        }
        // each position included with probability 1/2
        for c in counts {
            assert!((c as f64 / rounds as f64 - 0.5).abs() < 0.01);
        }
        assert!(buf.sample_indices(&mut rng, 19).is_err());
        assert!(ReplayBuffer::new(0).is_err());
    }
}
