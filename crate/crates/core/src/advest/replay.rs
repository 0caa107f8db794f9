use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum StoredAction {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// One environment transition, observations stored featurized.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: StoredAction,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity, data: Vec::with_capacity(capacity.min(4096)), next: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Uniform batch of exactly `batch_size` transitions.
    pub fn sample<'a>(
        &'a self,
        batch_size: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<TransitionBatch<'a>> {
        if self.data.len() < batch_size {
            return Err(Error::Training(format!(
                "replay holds {} transitions, batch needs {batch_size}",
                self.data.len()
            )));
        }
        let transitions =
            (0..batch_size).map(|_| &self.data[rng.gen_range(0..self.data.len())]).collect();
        Ok(TransitionBatch { transitions })
    }
}

/// A sampled batch; its length is exactly the configured B.
#[derive(Debug)]
pub struct TransitionBatch<'a> {
    pub transitions: Vec<&'a Transition>,
}

impl<'a> TransitionBatch<'a> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn t(r: f64) -> Transition {
        Transition {
            obs: vec![r],
            action: StoredAction::Discrete(0),
            reward: r,
            next_obs: vec![r],
            done: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(i as f64));
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = buf.data.iter().map(|x| x.reward).collect();
        assert!(rewards.contains(&4.0) && rewards.contains(&3.0));
        assert!(!rewards.contains(&0.0) && !rewards.contains(&1.0));
    }

    #[test]
    fn sample_needs_enough_data() {
        let mut buf = ReplayBuffer::new(10);
        buf.push(t(0.0));
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(buf.sample(2, &mut rng).is_err());
        buf.push(t(1.0));
        let batch = buf.sample(2, &mut rng).unwrap();
        assert_eq!(batch.len(), 2);
    }
}
