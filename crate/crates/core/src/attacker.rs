//! DRL jammer: observation memory, listening/attacking modes, the
//! stop-retrain-attack (SRA) schedule and the optional power budget.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actor_critic::{epsilon_greedy, sample_scores, ActorCriticAgent, ObservationMatrix, ParameterBlob};
use crate::error::Result;
use crate::rng::SimRng;

/// Jammer reward for one slot.
///
/// | same channel | victim's channel good | reward |
/// |---|---|---|
/// | yes | yes | +1 |
/// | yes | no | +0.5 |
/// | no | no | −0.5 |
/// | no | yes | −1 |
pub fn attacker_reward(attacker_action: usize, victim_action: usize, victim_good: bool) -> f64 {
    match (attacker_action == victim_action, victim_good) {
        (true, true) => 1.0,
        (true, false) => 0.5,
        (false, false) => -0.5,
        (false, true) => -1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Listening,
    Attacking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SraPhase {
    /// Jamming and learning.
    Attack,
    /// Jamming with learning frozen because the victim is already down.
    FrozenAttack,
    /// Not jamming, not learning, waiting for the victim to return.
    Listen,
    /// Initial policy reloaded, learning in listening mode.
    Retrain,
}

impl SraPhase {
    pub fn mode(self) -> Mode {
        match self {
            SraPhase::Attack | SraPhase::FrozenAttack => Mode::Attacking,
            SraPhase::Listen | SraPhase::Retrain => Mode::Listening,
        }
    }

    pub fn learning(self) -> bool {
        matches!(self, SraPhase::Attack | SraPhase::Retrain)
    }

    /// Whether `self → next` is a legal step of the cycle.
    pub fn may_follow(self, next: SraPhase) -> bool {
        use SraPhase::*;
        self == next
            || matches!(
                (self, next),
                (Attack, FrozenAttack) | (Attack, Listen) | (FrozenAttack, Listen) | (Listen, Retrain) | (Retrain, Attack)
            )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SraPhase::Attack => "attack",
            SraPhase::FrozenAttack => "frozen_attack",
            SraPhase::Listen => "listen",
            SraPhase::Retrain => "retrain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SraConfig {
    pub cycle_length: usize,
    pub retrain_length: usize,
    pub freeze_threshold: f64,
    /// Slots spent between stopping the attack and reloading the initial
    /// policy. Zero means the reload happens immediately.
    pub listen_length: usize,
}

impl Default for SraConfig {
    fn default() -> Self {
        Self { cycle_length: 2000, retrain_length: 200, freeze_threshold: 0.30, listen_length: 0 }
    }
}

/// What the caller must do after an SRA tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SraDecision {
    pub phase: SraPhase,
    /// Restore the initial policy before the next slot.
    pub reload_initial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SraState {
    pub cfg: SraConfig,
    phase: SraPhase,
    /// Slots since the current cycle's attack began.
    cycle_clock: usize,
    /// Slots spent in the current phase.
    phase_clock: usize,
    was_frozen: bool,
}

impl SraState {
    pub fn new(cfg: SraConfig) -> Self {
        Self { cfg, phase: SraPhase::Attack, cycle_clock: 0, phase_clock: 0, was_frozen: false }
    }

    pub fn phase(&self) -> SraPhase {
        self.phase
    }

    pub fn cycle_clock(&self) -> usize {
        self.cycle_clock
    }

    /// Advances one slot given the current victim-accuracy estimate.
    pub fn tick(&mut self, victim_accuracy: f64) -> SraDecision {
        self.cycle_clock += 1;
        self.phase_clock += 1;
        let mut reload = false;
        let next = match self.phase {
            SraPhase::Attack if self.cycle_clock > self.cfg.cycle_length => SraPhase::Listen,
            SraPhase::Attack if victim_accuracy < self.cfg.freeze_threshold => SraPhase::FrozenAttack,
            SraPhase::FrozenAttack
                if self.cycle_clock > self.cfg.cycle_length || victim_accuracy > self.cfg.freeze_threshold =>
            {
                SraPhase::Listen
            }
            SraPhase::Listen if self.phase_clock >= self.cfg.listen_length => SraPhase::Retrain,
            SraPhase::Retrain if self.phase_clock >= self.cfg.retrain_length => SraPhase::Attack,
            p => p,
        };
        if next != self.phase {
            self.enter(next);
            if next == SraPhase::Listen && self.cfg.listen_length == 0 {
                self.enter(SraPhase::Retrain);
            }
            if self.phase == SraPhase::Retrain {
                reload = true;
            }
        }
        SraDecision { phase: self.phase, reload_initial: reload }
    }

    fn enter(&mut self, next: SraPhase) {
        debug_assert!(self.phase.may_follow(next));
        if next == SraPhase::FrozenAttack {
            self.was_frozen = true;
        }
        if next == SraPhase::Attack {
            self.cycle_clock = 0;
            self.was_frozen = false;
        }
        self.phase = next;
        self.phase_clock = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetConfig {
    /// Attack rate θ.
    pub theta: f64,
    /// Threshold-update rate θ_u.
    pub theta_update: f64,
    pub period: usize,
    /// Threshold used in the first period, before any probabilities have
    /// been recorded. 1.0 makes the first period a calibration period.
    pub initial_threshold: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { theta: 0.3, theta_update: 0.3, period: 1000, initial_threshold: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetState {
    pub cfg: BudgetConfig,
    threshold: f64,
    attacks_this_period: usize,
    recorded_max_probs: Vec<f64>,
}

impl BudgetState {
    pub fn new(cfg: BudgetConfig) -> Self {
        Self { threshold: cfg.initial_threshold, attacks_this_period: 0, recorded_max_probs: Vec::with_capacity(cfg.period), cfg }
    }

    pub fn max_attacks(&self) -> usize {
        (self.cfg.period as f64 * self.cfg.theta).floor() as usize
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn attacks_this_period(&self) -> usize {
        self.attacks_this_period
    }

    /// Records this slot's top score and decides whether a jam is allowed.
    /// Must be called once per slot, attacking or not, so periods stay
    /// aligned with wall-clock slots.
    pub fn tick(&mut self, scores: &[f64], attacking: bool) -> bool {
        let p_max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let permitted = attacking && p_max > self.threshold && self.attacks_this_period < self.max_attacks();
        if permitted {
            self.attacks_this_period += 1;
        }
        self.recorded_max_probs.push(p_max);
        if self.recorded_max_probs.len() == self.cfg.period {
            self.close_period();
        }
        permitted
    }

    /// New threshold: the ⌊T·θ_u⌋-th largest top score of the finished
    /// period, so roughly a θ_u fraction of similar slots clear it.
    fn close_period(&mut self) {
        let mut probs = std::mem::take(&mut self.recorded_max_probs);
        probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let rank = (self.cfg.period as f64 * self.cfg.theta_update).floor() as usize;
        self.threshold = match rank {
            0 => f64::INFINITY,
            r => probs[r.min(probs.len()) - 1],
        };
        self.attacks_this_period = 0;
        self.recorded_max_probs = probs;
        self.recorded_max_probs.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackerConfig {
    pub memory_depth: usize,
    pub epsilon: f64,
    /// Window of the jammer's own victim-accuracy estimate.
    pub accuracy_window: usize,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        Self { memory_depth: 16, epsilon: 0.1, accuracy_window: 100 }
    }
}

/// Channel chosen this slot, and whether a jamming signal goes out on it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackDecision {
    pub channel: usize,
    pub jam: Option<usize>,
    pub greedy: bool,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttackerState {
    pub agent: ActorCriticAgent,
    pub memory: ObservationMatrix,
    pub cfg: AttackerConfig,
    pub mode: Mode,
    pub learning_enabled: bool,
    /// Draw the greedy branch from the softmax instead of argmax (pre-training).
    pub sample_actions: bool,
    pub initial_policy: ParameterBlob,
    pub sra: Option<SraState>,
    pub budget: Option<BudgetState>,
    victim_success: VecDeque<bool>,
    rng: SimRng,
}

impl AttackerState {
    pub fn new(agent: ActorCriticAgent, cfg: AttackerConfig, rng: SimRng) -> Self {
        let n = agent.n_actions();
        let initial_policy = agent.snapshot();
        Self {
            memory: ObservationMatrix::new(n, cfg.memory_depth),
            agent,
            cfg,
            mode: Mode::Listening,
            learning_enabled: true,
            sample_actions: false,
            initial_policy,
            sra: None,
            budget: None,
            victim_success: VecDeque::with_capacity(cfg.accuracy_window),
            rng,
        }
    }

    /// Takes the current parameters as the policy SRA reloads.
    pub fn mark_initial_policy(&mut self) {
        self.initial_policy = self.agent.snapshot();
    }

    /// Switches to attacking under the SRA schedule.
    pub fn start_sra(&mut self, cfg: SraConfig) {
        self.sra = Some(SraState::new(cfg));
        self.mode = Mode::Attacking;
        self.learning_enabled = true;
    }

    pub fn phase(&self) -> Option<SraPhase> {
        self.sra.as_ref().map(|s| s.phase())
    }

    /// Chooses a channel; emits a jam only when attacking (and budget allows).
    pub fn decide(&mut self) -> Result<AttackDecision> {
        let scores = self.agent.actor.scores(&self.memory)?;
        let d = epsilon_greedy(&scores, self.cfg.epsilon, &mut self.rng);
        let channel = if self.sample_actions && d.greedy { sample_scores(&scores, &mut self.rng) } else { d.action };
        let attacking = self.mode == Mode::Attacking;
        let permitted = match self.budget.as_mut() {
            Some(b) => b.tick(&scores, attacking),
            None => attacking,
        };
        let jam = permitted.then_some(channel);
        Ok(AttackDecision { channel, jam, greedy: d.greedy, scores })
    }

    /// Feedback after the slot resolves; returns the jammer's reward.
    pub fn observe(&mut self, decision: &AttackDecision, victim_action: usize, victim_good: bool) -> Result<f64> {
        let reward = attacker_reward(decision.channel, victim_action, victim_good);
        let before = self.memory.clone();
        self.memory.push(decision.channel, reward);
        if self.learning_enabled && decision.greedy {
            self.agent.learn(&before, decision.channel, reward, &self.memory)?;
        }
        let victim_ok = victim_good && decision.jam != Some(victim_action);
        if self.victim_success.len() == self.cfg.accuracy_window {
            self.victim_success.pop_front();
        }
        self.victim_success.push_back(victim_ok);
        Ok(reward)
    }

    /// The jammer's own estimate of the victim's recent accuracy.
    pub fn victim_accuracy_estimate(&self) -> f64 {
        if self.victim_success.is_empty() {
            return 1.0;
        }
        self.victim_success.iter().filter(|&&s| s).count() as f64 / self.victim_success.len() as f64
    }

    /// End-of-slot schedule update. No-op without SRA.
    pub fn tick(&mut self) -> Result<()> {
        let estimate = self.victim_accuracy_estimate();
        let Some(sra) = self.sra.as_mut() else { return Ok(()) };
        let decision = sra.tick(estimate);
        if decision.reload_initial {
            let blob = self.initial_policy.clone();
            self.agent.restore(&blob)?;
        }
        self.mode = decision.phase.mode();
        self.learning_enabled = decision.phase.learning();
        Ok(())
    }

    pub fn uniform_draw(&mut self) -> f64 {
        self.rng.gen()
    }
}
