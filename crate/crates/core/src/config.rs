//! Experiment configuration, loaded from JSON. Every field has a default,
//! so a partial file only overrides what it names.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::actor_critic::AgentParams;
use crate::attacker::{AttackerConfig, BudgetConfig, SraConfig};
use crate::defense::imitation::{default_imitation_probs, validate_imitation_probs, ImitationRewardKind};
use crate::defense::orthogonal::OrthoTrainConfig;
use crate::defense::pid::PidConfig;
use crate::detector::DetectionConfig;
use crate::env::{ChannelPattern, GoodSetMapping};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub n_channels: usize,
    pub n_good: usize,
    pub switch_prob: f64,
    pub mapping: GoodSetMapping,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { n_channels: 16, n_good: 2, switch_prob: 0.95, mapping: GoodSetMapping::Contiguous }
    }
}

impl EnvConfig {
    pub fn build(&self, rng: SimRng) -> Result<ChannelPattern> {
        ChannelPattern::new(self.n_channels, self.n_good, self.switch_prob, self.mapping, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VictimConfig {
    pub agent: AgentParams,
    pub memory_depth: usize,
    pub epsilon: f64,
    /// Exploration once a diversified defense takes over channel choice.
    pub defense_epsilon: f64,
}

impl Default for VictimConfig {
    fn default() -> Self {
        Self { agent: AgentParams::default(), memory_depth: 16, epsilon: 0.1, defense_epsilon: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackerSettings {
    pub agent: AgentParams,
    pub attacker: AttackerConfig,
    pub sra: SraConfig,
    pub budget: BudgetConfig,
}

/// Jammer-side learners need an entropy bonus: the victim's channel usage
/// is uneven, and without it the policy settles on the most popular
/// channel before it learns to track the victim.
const JAMMER_ENTROPY: f64 = 0.1;

impl Default for AttackerSettings {
    fn default() -> Self {
        Self {
            agent: AgentParams { entropy_weight: JAMMER_ENTROPY, ..AgentParams::default() },
            attacker: AttackerConfig::default(),
            sra: SraConfig::default(),
            budget: BudgetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidSettings {
    /// Learn the pre-jam channel state while the PID defense runs.
    pub partial_reward: bool,
    /// `None` uses the built-in vectors for the configured channel count.
    pub config: Option<PidConfig>,
}

impl Default for PidSettings {
    fn default() -> Self {
        Self { partial_reward: true, config: None }
    }
}

impl PidSettings {
    pub fn resolve(&self, n_channels: usize) -> Result<PidConfig> {
        let cfg = self.config.clone().unwrap_or_else(|| PidConfig::default_for(n_channels));
        cfg.validate()?;
        if cfg.n_ranks() != n_channels {
            return Err(Error::DimensionMismatch { expected: n_channels, got: cfg.n_ranks() });
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImitationSettings {
    pub agent: AgentParams,
    pub memory_depth: usize,
    pub epsilon: f64,
    pub reward: ImitationRewardKind,
    pub probs: Option<Vec<f64>>,
}

impl Default for ImitationSettings {
    fn default() -> Self {
        Self {
            agent: AgentParams { hidden: [64, 32], entropy_weight: JAMMER_ENTROPY, ..AgentParams::default() },
            memory_depth: 16,
            epsilon: 0.1,
            reward: ImitationRewardKind::Match,
            probs: None,
        }
    }
}

impl ImitationSettings {
    pub fn resolve_probs(&self, n_channels: usize) -> Result<Vec<f64>> {
        let p = self.probs.clone().unwrap_or_else(|| default_imitation_probs(n_channels));
        if p.len() != n_channels {
            return Err(Error::DimensionMismatch { expected: n_channels, got: p.len() });
        }
        validate_imitation_probs(&p)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub victim_slots: usize,
    pub attacker_slots: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { victim_slots: 500_000, attacker_slots: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub victim_start: usize,
    pub attack_start: usize,
    pub defense_start: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { victim_start: 0, attack_start: 2000, defense_start: 2400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub moving_average_window: usize,
    pub pdf_bins: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { moving_average_window: 200, pdf_bins: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CheckpointPaths {
    pub victim: Option<PathBuf>,
    pub attacker: Option<PathBuf>,
    pub imitation: Option<PathBuf>,
    pub orthogonal_1: Option<PathBuf>,
    pub orthogonal_2: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    NoAttack,
    SraAttack,
    BudgetedAttack,
    DefensePid,
    DefenseImitation,
    DefenseOrthogonal,
    DetectEnvChange,
    DetectAttack,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::NoAttack,
        Scenario::SraAttack,
        Scenario::BudgetedAttack,
        Scenario::DefensePid,
        Scenario::DefenseImitation,
        Scenario::DefenseOrthogonal,
        Scenario::DetectEnvChange,
        Scenario::DetectAttack,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::NoAttack => "no_attack",
            Scenario::SraAttack => "sra_attack",
            Scenario::BudgetedAttack => "budgeted_attack",
            Scenario::DefensePid => "defense_pid",
            Scenario::DefenseImitation => "defense_imitation",
            Scenario::DefenseOrthogonal => "defense_orthogonal",
            Scenario::DetectEnvChange => "detect_env_change",
            Scenario::DetectAttack => "detect_attack",
        }
    }

    pub fn has_attacker(self) -> bool {
        !matches!(self, Scenario::NoAttack | Scenario::DetectEnvChange)
    }

    pub fn needs_imitation(self) -> bool {
        matches!(self, Scenario::DefenseImitation | Scenario::DetectEnvChange | Scenario::DetectAttack)
    }

    pub fn needs_orthogonal(self) -> bool {
        matches!(self, Scenario::DefenseOrthogonal | Scenario::DetectEnvChange | Scenario::DetectAttack)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub victim: VictimConfig,
    pub attacker: AttackerSettings,
    pub pid: PidSettings,
    pub imitation: ImitationSettings,
    pub orthogonal: OrthoTrainConfig,
    pub detector: DetectionConfig,
    pub pretrain: PretrainConfig,
    pub metrics: MetricsConfig,
    pub scenario: Scenario,
    pub schedule: Schedule,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub checkpoints: CheckpointPaths,
}

/// Detector thresholds for 2-of-16 good channels. A stale policy sits near
/// the chance accuracy of 0.125 rather than at zero, so the collapse band
/// reaches up to 0.3. The longer window keeps brief dips of an attacked
/// victim out of that band.
fn calibrated_detector() -> DetectionConfig {
    DetectionConfig {
        recovery_floor: 0.5,
        collapse_ceiling: 0.3,
        trigger_drop: 0.7,
        window: 1000,
        ..DetectionConfig::default()
    }
}

/// Rank 2 is usually the other good channel, so the diversified draw
/// leans on it almost as much as on the top pick.
fn calibrated_imitation() -> ImitationSettings {
    let mut p = vec![0.0; EnvConfig::default().n_channels];
    p[..4].copy_from_slice(&[0.45, 0.44, 0.06, 0.05]);
    ImitationSettings { probs: Some(p), ..ImitationSettings::default() }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            victim: VictimConfig::default(),
            attacker: AttackerSettings::default(),
            pid: PidSettings::default(),
            imitation: calibrated_imitation(),
            orthogonal: OrthoTrainConfig::default(),
            detector: calibrated_detector(),
            pretrain: PretrainConfig::default(),
            metrics: MetricsConfig::default(),
            scenario: Scenario::NoAttack,
            schedule: Schedule::default(),
            horizon: 20_000,
            seeds: vec![1, 2, 3, 4, 5],
            checkpoints: CheckpointPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if !(s.victim_start < s.attack_start && s.attack_start < s.defense_start) {
            return Err(Error::InvalidConfig("schedule offsets must be strictly increasing".into()));
        }
        if self.horizon <= s.defense_start {
            return Err(Error::InvalidConfig(format!("horizon {} must exceed every schedule offset", self.horizon)));
        }
        for (name, eps) in [("victim", self.victim.epsilon), ("attacker", self.attacker.attacker.epsilon)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::InvalidConfig(format!("{name} epsilon {eps} outside [0, 1]")));
            }
        }
        let b = &self.attacker.budget;
        if !(b.theta > 0.0 && b.theta <= 1.0) || b.period == 0 {
            return Err(Error::InvalidConfig("budget needs 0 < theta <= 1 and a positive period".into()));
        }
        if self.metrics.moving_average_window == 0 || self.metrics.pdf_bins == 0 {
            return Err(Error::InvalidConfig("metrics window and bin count must be positive".into()));
        }
        self.pid.resolve(self.env.n_channels)?;
        self.imitation.resolve_probs(self.env.n_channels)?;
        self.orthogonal.validate()?;
        self.detector.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
