use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True termination only; time-limit truncation is stored as `false`.
    pub done: bool,
}

/// Minibatch in matrix form, one transition per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[Transition]) -> Self {
        let n = items.len();
        let ds = items.first().map_or(0, |t| t.state.len());
        let da = items.first().map_or(0, |t| t.action.len());
        Batch {
            states: Array2::from_shape_fn((n, ds), |(i, j)| items[i].state[j]),
            actions: Array2::from_shape_fn((n, da), |(i, j)| items[i].action[j]),
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: Array2::from_shape_fn((n, ds), |(i, j)| items[i].next_state[j]),
            dones: items.iter().map(|t| f64::from(u8::from(t.done))).collect(),
        }
    }
}

/// Fixed-capacity ring buffer of transitions with uniform sampling (with
/// replacement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    len: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            len: 0,
            next: 0,
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

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        check_dim("transition state", self.state_dim, t.state.len())?;
        check_dim("transition next state", self.state_dim, t.next_state.len())?;
        check_dim("transition action", self.action_dim, t.action.len())?;
        let (ds, da) = (self.state_dim, self.action_dim);
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let i = self.next;
            self.states[i * ds..(i + 1) * ds].copy_from_slice(&t.state);
            self.actions[i * da..(i + 1) * da].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_states[i * ds..(i + 1) * ds].copy_from_slice(&t.next_state);
            self.dones[i] = t.done;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len {
            return None;
        }
        let (ds, da) = (self.state_dim, self.action_dim);
        Some(Transition {
            state: self.states[i * ds..(i + 1) * ds].to_vec(),
            action: self.actions[i * da..(i + 1) * da].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * ds..(i + 1) * ds].to_vec(),
            done: self.dones[i],
        })
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        assert!(self.len > 0, "cannot sample from an empty replay buffer");
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.len)).collect();
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let (ds, da) = (self.state_dim, self.action_dim);
        let n = idx.len();
        let mut states = Array2::zeros((n, ds));
        let mut actions = Array2::zeros((n, da));
        let mut next_states = Array2::zeros((n, ds));
        for (row, &i) in idx.iter().enumerate() {
            states
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.states[i * ds..(i + 1) * ds]);
            actions
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.actions[i * da..(i + 1) * da]);
            next_states
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.next_states[i * ds..(i + 1) * ds]);
        }
        Batch {
            states,
            actions,
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_states,
            dones: idx.iter().map(|&i| f64::from(u8::from(self.dones[i]))).collect(),
        }
    }
}
