use std::collections::VecDeque;

use rand::Rng;

use super::action::ActionCode;
use crate::error::{Error, Result};

/// One episode of experience for all agents. Slot `t`'s transition leads to
/// slot `t + 1`; the last slot is terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub num_rbs: usize,
    /// `[slot][agent]` encoded local state.
    pub local_states: Vec<Vec<Vec<f64>>>,
    /// `[slot][agent]` action index.
    pub actions: Vec<Vec<usize>>,
    /// `[slot][agent]` coverage mask.
    pub masks: Vec<Vec<u64>>,
    /// `[slot]` team reward.
    pub team_rewards: Vec<f64>,
    /// `[slot][agent]` local reward.
    pub local_rewards: Vec<Vec<f64>>,
    /// `[slot]` flattened physical positions.
    pub global_states: Vec<Vec<f64>>,
}

impl EpisodeRecord {
    pub fn new(num_rbs: usize) -> Self {
        Self {
            num_rbs,
            local_states: Vec::new(),
            actions: Vec::new(),
            masks: Vec::new(),
            team_rewards: Vec::new(),
            local_rewards: Vec::new(),
            global_states: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn num_agents(&self) -> usize {
        self.actions.first().map_or(0, Vec::len)
    }

    /// Appends one slot. Rejects actions that violate their agent's mask.
    pub fn push_slot(
        &mut self,
        local_states: Vec<Vec<f64>>,
        actions: Vec<usize>,
        masks: Vec<u64>,
        team_reward: f64,
        local_rewards: Vec<f64>,
        global_state: Vec<f64>,
    ) -> Result<()> {
        let m = actions.len();
        if local_states.len() != m || masks.len() != m || local_rewards.len() != m {
            return Err(Error::dim("EpisodeRecord slot agents", m, local_states.len()));
        }
        if !self.is_empty() && m != self.num_agents() {
            return Err(Error::dim("EpisodeRecord agents", self.num_agents(), m));
        }
        for (a, mask) in actions.iter().zip(&masks) {
            if !ActionCode::from_index(*a).is_valid(*mask, self.num_rbs) {
                return Err(Error::InvalidArgument(format!("action {a} violates mask {mask:#b}")));
            }
        }
        self.local_states.push(local_states);
        self.actions.push(actions);
        self.masks.push(masks);
        self.team_rewards.push(team_reward);
        self.local_rewards.push(local_rewards);
        self.global_states.push(global_state);
        Ok(())
    }

    pub fn is_terminal(&self, t: usize) -> bool {
        t + 1 == self.len()
    }

    pub fn next_global_state(&self, t: usize) -> Option<&[f64]> {
        self.global_states.get(t + 1).map(Vec::as_slice)
    }
}

/// FIFO replay memory of whole episodes, bounded by total transitions.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    episodes: VecDeque<EpisodeRecord>,
    transitions: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            episodes: VecDeque::new(),
            transitions: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.transitions
    }

    pub fn is_empty(&self) -> bool {
        self.transitions == 0
    }

    pub fn episodes(&self) -> &VecDeque<EpisodeRecord> {
        &self.episodes
    }

    pub fn episode(&self, i: usize) -> &EpisodeRecord {
        &self.episodes[i]
    }

    /// Stores an episode, evicting the oldest episodes while over capacity.
    /// The newest episode is always kept.
    pub fn push(&mut self, episode: EpisodeRecord) {
        if episode.is_empty() {
            return;
        }
        self.transitions += episode.len();
        self.episodes.push_back(episode);
        while self.transitions > self.capacity && self.episodes.len() > 1 {
            let old = self.episodes.pop_front().expect("non-empty");
            self.transitions -= old.len();
        }
    }

    /// `min(batch, len)` distinct `(episode, slot)` pairs, sorted.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<(usize, usize)> {
        let k = batch.min(self.transitions);
        let mut flat = rand::seq::index::sample(rng, self.transitions, k).into_vec();
        flat.sort_unstable();
        let mut out = Vec::with_capacity(k);
        let mut ep = 0;
        let mut offset = 0;
        for f in flat {
            while f >= offset + self.episodes[ep].len() {
                offset += self.episodes[ep].len();
                ep += 1;
            }
            out.push((ep, f - offset));
        }
        out
    }
}
