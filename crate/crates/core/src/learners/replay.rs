use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Fixed-capacity FIFO store of transitions, kept as flat rows.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    terminal: Vec<bool>,
    /// Slot the next push overwrites once full.
    head: usize,
}

/// A sampled minibatch; row `i` of every field belongs to the same transition.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 where the transition ended the episode with no bootstrap.
    pub terminal: Array1<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            obs_dim,
            action_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            terminal: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], terminal: bool) {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        assert_eq!(action.len(), self.action_dim);
        if self.len() < self.capacity {
            self.obs.extend_from_slice(obs);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.terminal.push(terminal);
        } else {
            let i = self.head;
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(obs);
            self.actions[i * self.action_dim..(i + 1) * self.action_dim].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next_obs);
            self.terminal[i] = terminal;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Reward stored in slot `i` (insertion order until the ring wraps).
    pub fn reward_at(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    /// Uniform minibatch, distinct indices within the batch.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Batch> {
        if batch == 0 || batch > self.len() {
            return Err(Error::InvalidParameter {
                name: "batch",
                reason: format!("cannot draw {batch} transitions from a buffer of {}", self.len()),
            });
        }
        let picks = index::sample(rng, self.len(), batch);
        let mut out = Batch {
            obs: Array2::zeros((batch, self.obs_dim)),
            actions: Array2::zeros((batch, self.action_dim)),
            rewards: Array1::zeros(batch),
            next_obs: Array2::zeros((batch, self.obs_dim)),
            terminal: Array1::zeros(batch),
        };
        for (row, i) in picks.iter().enumerate() {
            let o = i * self.obs_dim;
            let a = i * self.action_dim;
            for j in 0..self.obs_dim {
                out.obs[[row, j]] = self.obs[o + j];
                out.next_obs[[row, j]] = self.next_obs[o + j];
            }
            for j in 0..self.action_dim {
                out.actions[[row, j]] = self.actions[a + j];
            }
            out.rewards[row] = self.rewards[i];
            out.terminal[row] = if self.terminal[i] { 1.0 } else { 0.0 };
        }
        Ok(out)
    }
}
