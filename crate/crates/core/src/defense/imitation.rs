//! Diversified defense driven by a victim-trained imitation of the jammer.
//!
//! The victim trains its own actor-critic "attacker" on what it can see
//! itself: its realized channel each slot. When the imitation predicts the
//! victim's top-ranked channel, the victim draws a rank from a fixed
//! array instead of taking the top channel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actor_critic::{epsilon_greedy, sample_scores, ActorCriticAgent, ObservationMatrix};
use crate::attacker::attacker_reward;
use crate::defense::{check_distribution, sample_index};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// `+1` when the imitation picked the victim's realized channel, else `−1`.
pub fn imitation_reward(imitation_action: usize, victim_action: usize) -> f64 {
    if imitation_action == victim_action {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImitationRewardKind {
    /// Match indicator on the victim's realized channel.
    #[default]
    Match,
    /// The true jammer's four-case reward (needs channel-state oracle).
    TrueAttacker,
    /// `+1` only for matching a victim channel that was good (needs oracle).
    GoodChannel,
}

impl ImitationRewardKind {
    pub const ALL: [ImitationRewardKind; 3] =
        [ImitationRewardKind::Match, ImitationRewardKind::TrueAttacker, ImitationRewardKind::GoodChannel];

    pub fn needs_oracle(self) -> bool {
        !matches!(self, ImitationRewardKind::Match)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ImitationRewardKind::Match => "match",
            ImitationRewardKind::TrueAttacker => "true_attacker",
            ImitationRewardKind::GoodChannel => "good_channel",
        }
    }
}

/// Checks `p(1) < 0.5`, unit sum, and strictly decreasing positive tail
/// from rank 2 onward (trailing zeros allowed).
pub fn validate_imitation_probs(probs: &[f64]) -> Result<()> {
    check_distribution(probs, 1e-9)?;
    if probs.len() < 2 || probs[0] >= 0.5 {
        return Err(Error::InvalidProbabilities("need p(1) < 0.5".into()));
    }
    let tail = &probs[1..];
    let positive = tail.iter().take_while(|&&p| p > 0.0).count();
    if tail[positive..].iter().any(|&p| p != 0.0) {
        return Err(Error::InvalidProbabilities("zeros must only trail".into()));
    }
    if tail[..positive].windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidProbabilities("p(2) > p(3) > ... must be strictly decreasing".into()));
    }
    Ok(())
}

pub fn default_imitation_probs(n_channels: usize) -> Vec<f64> {
    const P: [f64; 10] = [0.4, 0.2, 0.15, 0.1, 0.06, 0.04, 0.02, 0.015, 0.01, 0.005];
    let mut p = vec![0.0; n_channels];
    for (dst, src) in p.iter_mut().zip(P) {
        *dst = src;
    }
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// Top channel unless the imitation predicts it; otherwise a draw from `probs`.
pub fn imitation_select_rule<R: Rng + ?Sized>(
    ranked_channels: &[usize],
    imitation_action: usize,
    probs: &[f64],
    rng: &mut R,
) -> Result<usize> {
    if ranked_channels.len() != probs.len() {
        return Err(Error::DimensionMismatch { expected: ranked_channels.len(), got: probs.len() });
    }
    if imitation_action != ranked_channels[0] {
        return Ok(ranked_channels[0]);
    }
    check_distribution(probs, 1e-9)?;
    Ok(ranked_channels[sample_index(probs, rng)])
}

/// Channel-state facts only available to the experimenter; used by the
/// alternative reward variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelOracle {
    pub victim_channel_good: bool,
}

#[derive(Debug, Clone)]
pub struct ImitationAttacker {
    pub agent: ActorCriticAgent,
    pub memory: ObservationMatrix,
    pub reward_kind: ImitationRewardKind,
    pub epsilon: f64,
    pub learning: bool,
    pub sample_actions: bool,
    last: Option<(usize, bool)>,
    rng: SimRng,
}

impl ImitationAttacker {
    pub fn new(agent: ActorCriticAgent, memory_depth: usize, reward_kind: ImitationRewardKind, epsilon: f64, rng: SimRng) -> Self {
        let n = agent.n_actions();
        Self {
            agent,
            memory: ObservationMatrix::new(n, memory_depth),
            reward_kind,
            epsilon,
            learning: true,
            sample_actions: false,
            last: None,
            rng,
        }
    }

    /// Predicts the channel the jammer will pick this slot.
    pub fn predict(&mut self) -> Result<usize> {
        let scores = self.agent.actor.scores(&self.memory)?;
        let d = epsilon_greedy(&scores, self.epsilon, &mut self.rng);
        let action = if self.sample_actions && d.greedy { sample_scores(&scores, &mut self.rng) } else { d.action };
        self.last = Some((action, d.greedy));
        Ok(action)
    }

    /// Learns from the victim's realized channel for the slot last predicted.
    pub fn observe(&mut self, victim_action: usize, oracle: Option<ChannelOracle>) -> Result<f64> {
        let (action, greedy) = self.last.take().ok_or_else(|| Error::InvalidConfig("observe before predict".into()))?;
        let reward = match (self.reward_kind, oracle) {
            (ImitationRewardKind::Match, _) => imitation_reward(action, victim_action),
            (ImitationRewardKind::TrueAttacker, Some(o)) => attacker_reward(action, victim_action, o.victim_channel_good),
            (ImitationRewardKind::GoodChannel, Some(o)) => {
                if action == victim_action && o.victim_channel_good {
                    1.0
                } else {
                    -1.0
                }
            }
            (kind, None) => {
                return Err(Error::InvalidConfig(format!("reward variant {} needs channel oracle", kind.as_str())))
            }
        };
        let before = self.memory.clone();
        self.memory.push(action, reward);
        if self.learning && greedy {
            self.agent.learn(&before, action, reward, &self.memory)?;
        }
        Ok(reward)
    }
}
