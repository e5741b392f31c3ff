//! The dynamic channel-access user.

use std::collections::VecDeque;

use rand::Rng;

use crate::actor_critic::{epsilon_greedy, sample_scores, ActorCriticAgent, Decision, ObservationMatrix};
use crate::env::{ChannelPattern, TransmissionKind, TransmissionOutcome};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Reward for a jammed slot on a channel that was good before the jam,
/// when the victim is allowed to learn the pre-jam state.
pub const PARTIAL_REWARD: f64 = 0.5;

/// Fixed-capacity record of per-slot success flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessHistory {
    capacity: usize,
    slots: VecDeque<bool>,
}

impl SuccessHistory {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), slots: VecDeque::with_capacity(capacity.max(1)) }
    }

    pub fn record(&mut self, success: bool) {
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(success);
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Success flag `back` slots ago (0 = most recent).
    pub fn get(&self, back: usize) -> Option<bool> {
        self.slots.len().checked_sub(back + 1).map(|i| self.slots[i])
    }

    /// Number of successes in the slots `[from_back, to_back)` ago; slots
    /// before the start of the record count as failures.
    pub fn count(&self, from_back: usize, to_back: usize) -> usize {
        (from_back..to_back).filter(|&b| self.get(b) == Some(true)).count()
    }

    /// Success fraction over the last `window` slots (or fewer if the
    /// record is shorter).
    pub fn accuracy(&self, window: usize) -> Result<f64> {
        if window == 0 {
            return Err(Error::InvalidConfig("accuracy window must be positive".into()));
        }
        if self.slots.is_empty() {
            return Err(Error::EmptySeries);
        }
        let n = window.min(self.slots.len());
        Ok(self.count(0, n) as f64 / n as f64)
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }
}

pub fn victim_reward(outcome: &TransmissionOutcome, partial_reward: bool) -> f64 {
    match outcome.kind {
        TransmissionKind::Success => 1.0,
        TransmissionKind::FailJammed if partial_reward && outcome.was_good_pre_jam => PARTIAL_REWARD,
        _ => -1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VictimStep {
    pub action: usize,
    pub reward: f64,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct VictimState {
    pub agent: ActorCriticAgent,
    pub memory: ObservationMatrix,
    pub epsilon: f64,
    pub history: SuccessHistory,
    /// Learn the pre-jam channel state (+0.5 on jammed good channels).
    pub partial_reward: bool,
    pub learning: bool,
    /// Training mode: sample from the softmax instead of taking the argmax.
    pub sample_actions: bool,
    rng: SimRng,
}

impl VictimState {
    pub fn new(agent: ActorCriticAgent, memory_depth: usize, epsilon: f64, rng: SimRng) -> Self {
        let n = agent.n_actions();
        Self {
            agent,
            memory: ObservationMatrix::new(n, memory_depth),
            epsilon,
            history: SuccessHistory::new(1000),
            partial_reward: false,
            learning: true,
            sample_actions: false,
            rng,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.agent.n_actions()
    }

    pub fn scores(&self) -> Result<Vec<f64>> {
        self.agent.actor.scores(&self.memory)
    }

    /// ε-greedy pick over given scores using the victim's exploration stream.
    /// In training mode the non-random branch samples the softmax.
    pub fn choose(&mut self, scores: &[f64]) -> Decision {
        let d = epsilon_greedy(scores, self.epsilon, &mut self.rng);
        if self.sample_actions && d.greedy {
            Decision { action: sample_scores(scores, &mut self.rng), greedy: true }
        } else {
            d
        }
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Applies the slot outcome: reward, memory, learning. Uniform
    /// exploration draws are remembered but not learned from.
    pub fn observe(&mut self, decision: Decision, outcome: &TransmissionOutcome) -> Result<VictimStep> {
        let action = decision.action;
        let reward = victim_reward(outcome, self.partial_reward);
        let before = self.memory.clone();
        self.memory.push(action, reward);
        if self.learning && decision.greedy {
            self.agent.learn(&before, action, reward, &self.memory)?;
        }
        let success = outcome.success();
        self.history.record(success);
        Ok(VictimStep { action, reward, success })
    }

    /// Full slot with ε-greedy channel choice against an already-committed jam.
    pub fn step(&mut self, env: &ChannelPattern, jammed: Option<usize>) -> Result<VictimStep> {
        let scores = self.scores()?;
        let decision = self.choose(&scores);
        let outcome = env.transmit(decision.action, jammed)?;
        self.observe(decision, &outcome)
    }

    pub fn accuracy(&self, window: usize) -> Result<f64> {
        self.history.accuracy(window)
    }

    /// Resets memory and success history, keeping the learned parameters.
    pub fn reset_memory(&mut self) {
        self.memory.clear();
        self.history.clear();
    }

    pub fn uniform_draw(&mut self) -> f64 {
        self.rng.gen()
    }
}
