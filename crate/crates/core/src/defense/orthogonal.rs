//! Defense via a pair of orthogonal policies.
//!
//! A policy's successful τ-th order transitions (two positively rewarded
//! actions `τ` slots apart) are counted in `N × N` matrices. Two policies
//! whose matrices barely overlap are "orthogonal": a jammer that has
//! learned one has little to go on against the other. Training alternates
//! between the two copies, steering each one's exploration away from the
//! other's transitions.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actor_critic::{sample_scores, ActorCriticAgent, ObservationMatrix, ParameterBlob};
use crate::config::{EnvConfig, VictimConfig};
use crate::defense::{normalize_clamped, sample_index};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Per-order `N × N` counts of successful action transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrixSet {
    n: usize,
    order_max: usize,
    counts: Vec<u64>,
}

impl TransitionMatrixSet {
    pub fn new(n_actions: usize, order_max: usize) -> Self {
        Self { n: n_actions, order_max, counts: vec![0; n_actions * n_actions * order_max] }
    }

    pub fn n_actions(&self) -> usize {
        self.n
    }

    pub fn order_max(&self) -> usize {
        self.order_max
    }

    fn idx(&self, order: usize, from: usize, to: usize) -> usize {
        debug_assert!((1..=self.order_max).contains(&order));
        ((order - 1) * self.n + from) * self.n + to
    }

    pub fn count(&self, order: usize, from: usize, to: usize) -> u64 {
        self.counts[self.idx(order, from, to)]
    }

    pub fn increment(&mut self, order: usize, from: usize, to: usize) {
        let i = self.idx(order, from, to);
        self.counts[i] += 1;
    }

    pub fn row(&self, order: usize, from: usize) -> &[u64] {
        let start = self.idx(order, from, 0);
        &self.counts[start..start + self.n]
    }

    pub fn matrix(&self, order: usize) -> &[u64] {
        let start = self.idx(order, 0, 0);
        &self.counts[start..start + self.n * self.n]
    }

    pub fn total(&self, order: usize) -> u64 {
        self.matrix(order).iter().sum()
    }

    /// Counts the transitions ending at the newest slot of the log
    /// (`actions.last()`, `rewards.last()`).
    pub fn record(&mut self, actions: &[usize], rewards: &[f64]) {
        debug_assert_eq!(actions.len(), rewards.len());
        let Some(t) = actions.len().checked_sub(1) else { return };
        if rewards[t] <= 0.0 {
            return;
        }
        for order in 1..=self.order_max.min(t) {
            if rewards[t - order] > 0.0 {
                self.increment(order, actions[t - order], actions[t]);
            }
        }
    }

    /// Replays a complete log slot by slot.
    pub fn from_log(n_actions: usize, order_max: usize, actions: &[usize], rewards: &[f64]) -> Self {
        let mut m = Self::new(n_actions, order_max);
        for t in 0..actions.len() {
            m.record(&actions[..=t], &rewards[..=t]);
        }
        m
    }
}

/// `Σ (M₁ ∘ M₂) / (ΣM₁ · ΣM₂)` for order `τ`.
pub fn normalized_correlation(m1: &TransitionMatrixSet, m2: &TransitionMatrixSet, order: usize) -> Result<f64> {
    if m1.n != m2.n {
        return Err(Error::DimensionMismatch { expected: m1.n, got: m2.n });
    }
    if order == 0 || order > m1.order_max.min(m2.order_max) {
        return Err(Error::InvalidConfig(format!("order {order} outside recorded range")));
    }
    let (t1, t2) = (m1.total(order), m2.total(order));
    if t1 == 0 || t2 == 0 {
        return Err(Error::InsufficientObservation { order });
    }
    let dot: f64 = m1.matrix(order).iter().zip(m2.matrix(order)).map(|(&a, &b)| a as f64 * b as f64).sum();
    Ok(dot / (t1 as f64 * t2 as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrthoTrainConfig {
    /// Decay ϱ across orders.
    pub decay: f64,
    /// Weight β of the other policy's success profile.
    pub reg_weight: f64,
    pub explore_eps: f64,
    pub explore_period: usize,
    pub listen_period: usize,
    pub order_max: usize,
    /// Orders checked for orthogonality.
    pub check_orders: usize,
    pub max_iterations: usize,
    /// Convergence when every checked correlation is below this fraction
    /// of policy 1's self-correlation.
    pub target_fraction: f64,
    pub lr_multiplier: f64,
    /// Update the networks only on rewarded slots while exploring, so
    /// the many failed guided draws do not erode the inherited policy.
    pub learn_successes_only: bool,
    /// Accuracy both policies need for a pair to be picked as "best".
    pub min_accuracy: f64,
    pub switch_threshold: f64,
    pub switch_period: usize,
    /// Slots of success history behind the accuracy checked at a boundary.
    pub switch_window: usize,
}

impl Default for OrthoTrainConfig {
    fn default() -> Self {
        Self {
            decay: 0.6,
            reg_weight: 0.3,
            explore_eps: 0.9,
            explore_period: 5000,
            listen_period: 2000,
            order_max: 5,
            check_orders: 3,
            max_iterations: 20,
            target_fraction: 0.1,
            lr_multiplier: 3.0,
            learn_successes_only: true,
            min_accuracy: 0.6,
            switch_threshold: 0.40,
            switch_period: 2000,
            switch_window: 500,
        }
    }
}

impl OrthoTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) || !(self.reg_weight > 0.0 && self.reg_weight < 1.0) {
            return Err(Error::InvalidConfig("decay and reg_weight must lie in (0, 1)".into()));
        }
        if self.check_orders == 0 || self.check_orders > self.order_max {
            return Err(Error::InvalidConfig("check_orders must be in 1..=order_max".into()));
        }
        if self.switch_period == 0 {
            return Err(Error::InvalidConfig("switch_period must be positive".into()));
        }
        Ok(())
    }
}

/// Order weight `η_τ`: +1.5 after a rewarded slot, −0.5 otherwise.
pub fn order_weight(reward: f64) -> f64 {
    if reward > 0.0 {
        1.5
    } else {
        -0.5
    }
}

/// Guided exploration distribution for the policy being trained.
///
/// `recent[τ-1]` is the trained policy's `(action, reward)` at slot `t−τ`.
/// `p_reg` is the other policy's per-channel success profile (normalized
/// to unit sum; pass zeros to disable).
pub fn exploration_distribution(
    other: &TransitionMatrixSet,
    recent: &[(usize, f64)],
    p_reg: &[f64],
    decay: f64,
    reg_weight: f64,
) -> Vec<f64> {
    let n = other.n_actions();
    let uniform = 1.0 / n as f64;
    let mut mix = vec![uniform; n];
    for (k, &(action, reward)) in recent.iter().take(other.order_max()).enumerate() {
        let order = k + 1;
        let inv: Vec<f64> = other.row(order, action).iter().map(|&c| 1.0 / (c as f64 + 1.0)).collect();
        let p = normalize_clamped(&inv).expect("inverse counts are positive");
        let w = decay.powi(k as i32) * order_weight(reward);
        for (m, pi) in mix.iter_mut().zip(&p) {
            *m += w * (pi - uniform);
        }
    }
    for (m, r) in mix.iter_mut().zip(p_reg) {
        *m += reg_weight * r;
    }
    normalize_clamped(&mix).unwrap_or_else(|| vec![uniform; n])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    One,
    Two,
}

impl PolicyId {
    pub fn other(self) -> Self {
        match self {
            PolicyId::One => PolicyId::Two,
            PolicyId::Two => PolicyId::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            PolicyId::One => 1,
            PolicyId::Two => 2,
        }
    }
}

/// At every `switch_period` boundary, swap policies if accuracy is below
/// the threshold. `clock` counts slots since the defense started.
pub fn switch_defense_tick(current: PolicyId, accuracy: f64, clock: usize, cfg: &OrthoTrainConfig) -> PolicyId {
    if clock > 0 && clock % cfg.switch_period == 0 && accuracy < cfg.switch_threshold {
        current.other()
    } else {
        current
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Policy trained in this iteration (`None` for the initial observation).
    pub trained: Option<PolicyId>,
    pub correlations: Vec<f64>,
    pub self_correlations: Vec<f64>,
    pub accuracy_1: f64,
    pub accuracy_2: f64,
}

impl IterationRecord {
    /// Worst-case correlation relative to self-correlation over checked orders.
    pub fn relative_correlation(&self) -> f64 {
        self.correlations
            .iter()
            .zip(&self.self_correlations)
            .map(|(c, s)| if *s > 0.0 { c / s } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoReport {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub best_iteration: usize,
    pub warning: Option<String>,
}

impl OrthoReport {
    pub fn best(&self) -> &IterationRecord {
        &self.iterations[self.best_iteration]
    }

    /// Tab-separated table, one row per iteration.
    pub fn to_tsv(&self) -> String {
        let orders = self.iterations.first().map_or(0, |r| r.correlations.len());
        let mut out = String::from("iteration\ttrained");
        for k in 1..=orders {
            out.push_str(&format!("\tcorr_{k}\tself_corr_{k}"));
        }
        out.push_str("\taccuracy_1\taccuracy_2\n");
        for r in &self.iterations {
            out.push_str(&format!("{}\t{}", r.iteration, r.trained.map_or(0, |p| p.index())));
            for (c, s) in r.correlations.iter().zip(&r.self_correlations) {
                out.push_str(&format!("\t{c:.6}\t{s:.6}"));
            }
            out.push_str(&format!("\t{:.4}\t{:.4}\n", r.accuracy_1, r.accuracy_2));
        }
        out.push_str(&format!("# converged={} best_iteration={}\n", self.converged, self.best_iteration));
        if let Some(w) = &self.warning {
            out.push_str(&format!("# warning: {w}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct OrthoTrainResult {
    pub policy_1: ParameterBlob,
    pub policy_2: ParameterBlob,
    pub matrices_1: TransitionMatrixSet,
    pub matrices_2: TransitionMatrixSet,
    pub report: OrthoReport,
}

/// What one greedy observation period of a policy produced.
#[derive(Debug, Clone)]
pub struct Observation {
    pub matrices: TransitionMatrixSet,
    /// Successful transmissions per channel, normalized to unit sum.
    pub success_profile: Vec<f64>,
    pub accuracy: f64,
}

struct Trainer<'a> {
    cfg: &'a OrthoTrainConfig,
    env: crate::env::ChannelPattern,
    depth: usize,
    rng: crate::rng::SimRng,
}

impl Trainer<'_> {
    /// Runs `agent` greedily without learning and records its transitions.
    fn observe(&mut self, agent: &ActorCriticAgent, slots: usize) -> Result<Observation> {
        let n = agent.n_actions();
        let mut memory = ObservationMatrix::new(n, self.depth);
        let mut matrices = TransitionMatrixSet::new(n, self.cfg.order_max);
        let mut actions = VecDeque::with_capacity(self.cfg.order_max + 1);
        let mut rewards = VecDeque::with_capacity(self.cfg.order_max + 1);
        let mut per_channel = vec![0.0; n];
        let mut successes = 0usize;
        for _ in 0..slots {
            self.env.advance();
            let scores = agent.actor.scores(&memory)?;
            let action = crate::nn::argmax(&scores);
            let ok = self.env.is_good(action);
            let reward = if ok { 1.0 } else { -1.0 };
            memory.push(action, reward);
            if actions.len() == self.cfg.order_max + 1 {
                actions.pop_front();
                rewards.pop_front();
            }
            actions.push_back(action);
            rewards.push_back(reward);
            matrices.record(actions.make_contiguous(), rewards.make_contiguous());
            if ok {
                successes += 1;
                per_channel[action] += 1.0;
            }
        }
        let success_profile = normalize_clamped(&per_channel).unwrap_or_else(|| vec![0.0; n]);
        Ok(Observation { matrices, success_profile, accuracy: successes as f64 / slots.max(1) as f64 })
    }

    /// Explores with `explore_eps`, drawing exploratory channels from the
    /// guided distribution built on the other policy's observation.
    fn train(&mut self, agent: &mut ActorCriticAgent, other: &Observation, slots: usize) -> Result<()> {
        let n = agent.n_actions();
        let mut memory = ObservationMatrix::new(n, self.depth);
        let mut recent: VecDeque<(usize, f64)> = VecDeque::with_capacity(self.cfg.order_max);
        for _ in 0..slots {
            self.env.advance();
            let scores = agent.actor.scores(&memory)?;
            let action = if self.rng.gen::<f64>() < self.cfg.explore_eps {
                let p = exploration_distribution(
                    &other.matrices,
                    recent.make_contiguous(),
                    &other.success_profile,
                    self.cfg.decay,
                    self.cfg.reg_weight,
                );
                sample_index(&p, &mut self.rng)
            } else {
                sample_scores(&scores, &mut self.rng)
            };
            let reward = if self.env.is_good(action) { 1.0 } else { -1.0 };
            let before = memory.clone();
            memory.push(action, reward);
            if reward > 0.0 || !self.cfg.learn_successes_only {
                agent.learn(&before, action, reward, &memory)?;
            }
            if recent.len() == self.cfg.order_max {
                recent.pop_back();
            }
            recent.push_front((action, reward));
        }
        Ok(())
    }
}

fn check_correlations(a: &Observation, b: &Observation, orders: usize) -> (Vec<f64>, Vec<f64>) {
    (1..=orders)
        .map(|k| {
            let c = normalized_correlation(&a.matrices, &b.matrices, k).unwrap_or(f64::INFINITY);
            let s = normalized_correlation(&a.matrices, &a.matrices, k).unwrap_or(0.0);
            (c, s)
        })
        .unzip()
}

/// Alternately retrains two copies of the victim so that their successful
/// transition patterns diverge. Offline: no jammer is present.
pub fn train_orthogonal_pair(
    victim: &ParameterBlob,
    victim_cfg: &VictimConfig,
    env_cfg: &EnvConfig,
    cfg: &OrthoTrainConfig,
    seed: u64,
) -> Result<OrthoTrainResult> {
    cfg.validate()?;
    let mut train_params = victim_cfg.agent;
    train_params.actor_lr *= cfg.lr_multiplier;
    train_params.critic_lr *= cfg.lr_multiplier;
    let mut policies = [ActorCriticAgent::from_blob(victim, &train_params)?, ActorCriticAgent::from_blob(victim, &train_params)?];

    let mut trainer = Trainer {
        cfg,
        env: env_cfg.build(substream(seed, Stream::Orthogonal, 1))?,
        depth: victim_cfg.memory_depth,
        rng: substream(seed, Stream::Orthogonal, 2),
    };

    let mut obs = [trainer.observe(&policies[0], cfg.listen_period)?, trainer.observe(&policies[1], cfg.listen_period)?];
    let mut iterations = Vec::new();
    let mut snapshots = Vec::new();
    let record = |iteration: usize, trained: Option<PolicyId>, obs: &[Observation; 2]| {
        let (correlations, self_correlations) = check_correlations(&obs[0], &obs[1], cfg.check_orders);
        IterationRecord { iteration, trained, correlations, self_correlations, accuracy_1: obs[0].accuracy, accuracy_2: obs[1].accuracy }
    };
    iterations.push(record(0, None, &obs));
    snapshots.push([policies[0].snapshot(), policies[1].snapshot()]);

    let mut converged = false;
    for iteration in 1..=cfg.max_iterations {
        let trained = if iteration % 2 == 1 { PolicyId::One } else { PolicyId::Two };
        let (a, b) = (trained.index() - 1, trained.other().index() - 1);
        let other = obs[b].clone();
        trainer.train(&mut policies[a], &other, cfg.explore_period)?;
        obs[a] = trainer.observe(&policies[a], cfg.listen_period)?;
        let rec = record(iteration, Some(trained), &obs);
        let done = rec.relative_correlation() < cfg.target_fraction;
        iterations.push(rec);
        snapshots.push([policies[0].snapshot(), policies[1].snapshot()]);
        if done {
            converged = true;
            break;
        }
    }

    let qualifies = |r: &IterationRecord| r.accuracy_1 >= cfg.min_accuracy && r.accuracy_2 >= cfg.min_accuracy;
    let by_corr = |a: &&IterationRecord, b: &&IterationRecord| {
        a.relative_correlation().partial_cmp(&b.relative_correlation()).unwrap_or(std::cmp::Ordering::Equal)
    };
    let best_iteration = if converged {
        iterations.len() - 1
    } else {
        iterations
            .iter()
            .skip(1)
            .filter(|r| qualifies(r))
            .min_by(by_corr)
            .or_else(|| iterations.iter().min_by(by_corr))
            .map(|r| r.iteration)
            .unwrap_or(0)
    };
    let warning = (!converged).then(|| {
        format!(
            "no orthogonal pair within {} iterations; best relative correlation {:.3}",
            cfg.max_iterations,
            iterations[best_iteration].relative_correlation()
        )
    });

    let [p1, p2] = snapshots.swap_remove(best_iteration);
    // Re-observe the chosen pair so the returned matrices describe it.
    let a1 = ActorCriticAgent::from_blob(&p1, &victim_cfg.agent)?;
    let a2 = ActorCriticAgent::from_blob(&p2, &victim_cfg.agent)?;
    let m1 = trainer.observe(&a1, cfg.listen_period)?.matrices;
    let m2 = trainer.observe(&a2, cfg.listen_period)?.matrices;
    Ok(OrthoTrainResult {
        policy_1: p1,
        policy_2: p2,
        matrices_1: m1,
        matrices_2: m2,
        report: OrthoReport { iterations, converged, best_iteration, warning },
    })
}

/// Greedy standalone accuracy of a policy with no jammer.
pub fn standalone_accuracy(
    blob: &ParameterBlob,
    victim_cfg: &VictimConfig,
    env_cfg: &EnvConfig,
    slots: usize,
    seed: u64,
) -> Result<f64> {
    let agent = ActorCriticAgent::from_blob(blob, &victim_cfg.agent)?;
    let cfg = OrthoTrainConfig::default();
    let mut trainer = Trainer {
        cfg: &cfg,
        env: env_cfg.build(substream(seed, Stream::Orthogonal, 3))?,
        depth: victim_cfg.memory_depth,
        rng: substream(seed, Stream::Orthogonal, 4),
    };
    Ok(trainer.observe(&agent, slots)?.accuracy)
}
