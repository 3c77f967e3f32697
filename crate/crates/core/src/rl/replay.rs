use rand::Rng;

use crate::envcore::SimRng;
use crate::error::{check_dim, Result};

/// Row-major minibatch: `n` rows of observations (state features joined with
/// the goal), actions in the agent's unit range, rewards and terminal flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub n: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    /// 1 where the transition ended the episode by success (no bootstrap).
    pub terminals: Vec<f64>,
}

/// Fixed-capacity ring buffer of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    len: usize,
    head: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    terminals: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            len: 0,
            head: 0,
            obs: vec![0.0; capacity * obs_dim],
            actions: vec![0.0; capacity * act_dim],
            rewards: vec![0.0; capacity],
            next_obs: vec![0.0; capacity * obs_dim],
            terminals: vec![0.0; capacity],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores one transition, overwriting the oldest when full.
    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], terminal: bool) -> Result<()> {
        check_dim("replay observation", self.obs_dim, obs.len())?;
        check_dim("replay next observation", self.obs_dim, next_obs.len())?;
        check_dim("replay action", self.act_dim, action.len())?;
        let k = self.head;
        let (od, ad) = (self.obs_dim, self.act_dim);
        self.obs[k * od..(k + 1) * od].copy_from_slice(obs);
        self.next_obs[k * od..(k + 1) * od].copy_from_slice(next_obs);
        self.actions[k * ad..(k + 1) * ad].copy_from_slice(action);
        self.rewards[k] = reward;
        self.terminals[k] = if terminal { 1.0 } else { 0.0 };
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        Ok(())
    }

    /// Uniform slot indices over the occupied part of the buffer.
    pub fn sample_indices(&self, n: usize, rng: &mut SimRng) -> Vec<usize> {
        if self.len == 0 {
            return Vec::new();
        }
        (0..n).map(|_| rng.random_range(0..self.len)).collect()
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let (od, ad) = (self.obs_dim, self.act_dim);
        let mut b = Batch {
            n: idx.len(),
            obs: Vec::with_capacity(idx.len() * od),
            actions: Vec::with_capacity(idx.len() * ad),
            rewards: Vec::with_capacity(idx.len()),
            next_obs: Vec::with_capacity(idx.len() * od),
            terminals: Vec::with_capacity(idx.len()),
        };
        for &k in idx {
            b.obs.extend_from_slice(&self.obs[k * od..(k + 1) * od]);
            b.next_obs.extend_from_slice(&self.next_obs[k * od..(k + 1) * od]);
            b.actions.extend_from_slice(&self.actions[k * ad..(k + 1) * ad]);
            b.rewards.push(self.rewards[k]);
            b.terminals.push(self.terminals[k]);
        }
        b
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Batch {
        let idx = self.sample_indices(n, rng);
        self.gather(&idx)
    }
}
