use crate::rng::Rng;
use rand::seq::index;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Borrowed minibatch, rows in sampling order.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.act_dim..(i + 1) * self.act_dim]
    }

    pub fn next_state(&self, i: usize) -> &[f64] {
        &self.next_states[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn from_transitions(obs_dim: usize, act_dim: usize, items: &[Transition]) -> Self {
        let mut b = Batch {
            obs_dim,
            act_dim,
            states: Vec::with_capacity(items.len() * obs_dim),
            actions: Vec::with_capacity(items.len() * act_dim),
            rewards: Vec::with_capacity(items.len()),
            next_states: Vec::with_capacity(items.len() * obs_dim),
            dones: Vec::with_capacity(items.len()),
        };
        for t in items {
            b.states.extend_from_slice(&t.state);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.reward);
            b.next_states.extend_from_slice(&t.next_state);
            b.dones.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }
}

/// Fixed-capacity ring of transitions stored in flat arrays. Storage grows
/// on demand up to the capacity, then the oldest slot is overwritten.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    obs_dim: usize,
    act_dim: usize,
    capacity: usize,
    len: usize,
    head: usize,
    insertions: u64,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(obs_dim: usize, act_dim: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            obs_dim,
            act_dim,
            capacity,
            len: 0,
            head: 0,
            insertions: 0,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
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

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Total pushes ever made, including overwritten ones.
    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], reward: f64, next: &[f64], done: bool) {
        assert_eq!(state.len(), self.obs_dim, "state dimension");
        assert_eq!(next.len(), self.obs_dim, "next-state dimension");
        assert_eq!(action.len(), self.act_dim, "action dimension");
        let d = if done { 1.0 } else { 0.0 };
        if self.rewards.len() < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_states.extend_from_slice(next);
            self.dones.push(d);
        } else {
            let i = self.head;
            self.states[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(state);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_states[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next);
            self.dones[i] = d;
        }
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        self.insertions += 1;
    }

    pub fn push_transition(&mut self, t: &Transition) {
        self.push(&t.state, &t.action, t.reward, &t.next_state, t.done);
    }

    pub fn get(&self, i: usize) -> Transition {
        assert!(i < self.len);
        Transition {
            state: self.states[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            action: self.actions[i * self.act_dim..(i + 1) * self.act_dim].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            done: self.dones[i] != 0.0,
        }
    }

    /// Uniform minibatch without replacement; `None` when too few stored.
    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Option<Batch> {
        if batch_size == 0 || self.len < batch_size {
            return None;
        }
        let idx = index::sample(rng, self.len, batch_size);
        let mut b = Batch {
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            states: Vec::with_capacity(batch_size * self.obs_dim),
            actions: Vec::with_capacity(batch_size * self.act_dim),
            rewards: Vec::with_capacity(batch_size),
            next_states: Vec::with_capacity(batch_size * self.obs_dim),
            dones: Vec::with_capacity(batch_size),
        };
        for i in idx.iter() {
            b.states
                .extend_from_slice(&self.states[i * self.obs_dim..(i + 1) * self.obs_dim]);
            b.actions
                .extend_from_slice(&self.actions[i * self.act_dim..(i + 1) * self.act_dim]);
            b.rewards.push(self.rewards[i]);
            b.next_states
                .extend_from_slice(&self.next_states[i * self.obs_dim..(i + 1) * self.obs_dim]);
            b.dones.push(self.dones[i]);
        }
        Some(b)
    }

    /// Flat storage and ring bookkeeping for checkpoints.
    pub fn raw_parts(&self) -> RawBuffer<'_> {
        RawBuffer {
            head: self.head,
            insertions: self.insertions,
            states: &self.states,
            actions: &self.actions,
            rewards: &self.rewards,
            next_states: &self.next_states,
            dones: &self.dones,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_raw_parts(
        obs_dim: usize,
        act_dim: usize,
        capacity: usize,
        head: usize,
        insertions: u64,
        states: Vec<f64>,
        actions: Vec<f64>,
        rewards: Vec<f64>,
        next_states: Vec<f64>,
        dones: Vec<f64>,
    ) -> Option<Self> {
        let len = rewards.len();
        let consistent = len <= capacity
            && states.len() == len * obs_dim
            && next_states.len() == len * obs_dim
            && actions.len() == len * act_dim
            && dones.len() == len
            && head < capacity
            && insertions as usize >= len;
        consistent.then_some(Self {
            obs_dim,
            act_dim,
            capacity,
            len,
            head,
            insertions,
            states,
            actions,
            rewards,
            next_states,
            dones,
        })
    }
}

pub struct RawBuffer<'a> {
    pub head: usize,
    pub insertions: u64,
    pub states: &'a [f64],
    pub actions: &'a [f64],
    pub rewards: &'a [f64],
    pub next_states: &'a [f64],
    pub dones: &'a [f64],
}
