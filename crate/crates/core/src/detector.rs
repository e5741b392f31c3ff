//! Telling a jamming attack from an environment change.
//!
//! Under the orthogonal-policy defense an attacked victim keeps recovering
//! (the jammer has to relearn after every switch), while after a change in
//! the channel pattern both policies are equally stale and accuracy stays
//! at or below chance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub probe_duration: usize,
    /// Leading probe slots ignored while the first crash plays out.
    pub grace: usize,
    pub recovery_floor: f64,
    pub collapse_ceiling: f64,
    /// Moving-average accuracy below which the probe starts.
    pub trigger_drop: f64,
    pub max_extensions: usize,
    /// Moving-average window of the probe trace.
    pub window: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            probe_duration: 8000,
            grace: 500,
            recovery_floor: 0.20,
            collapse_ceiling: 0.05,
            trigger_drop: 0.40,
            max_extensions: 1,
            window: 200,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.collapse_ceiling < self.recovery_floor) {
            return Err(Error::InvalidConfig("collapse_ceiling must be below recovery_floor".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig("detector window must be positive".into()));
        }
        if self.probe_duration == 0 || 2 * self.grace >= self.probe_duration {
            return Err(Error::InvalidConfig("grace must be shorter than half the probe".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    Attack,
    EnvironmentChange,
    Inconclusive,
}

impl Detection {
    pub fn as_str(self) -> &'static str {
        match self {
            Detection::Attack => "attack",
            Detection::EnvironmentChange => "environment_change",
            Detection::Inconclusive => "inconclusive",
        }
    }
}

/// Classifies the first `probe_duration` samples of a moving-average
/// accuracy trace recorded from the probe's start.
///
/// Attack: after the grace window the trace climbs above `recovery_floor`
/// and never falls to `collapse_ceiling`. Environment change: the whole
/// latter half sits below `collapse_ceiling`. The two cannot both hold
/// because the latter half lies inside the post-grace window.
pub fn detect(trace: &[f64], cfg: &DetectionConfig) -> Result<Detection> {
    if trace.len() < cfg.probe_duration {
        return Err(Error::TraceTooShort { needed: cfg.probe_duration, got: trace.len() });
    }
    let probe = &trace[..cfg.probe_duration];
    let settled = &probe[cfg.grace..];
    let max = settled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = settled.iter().copied().fold(f64::INFINITY, f64::min);
    if max > cfg.recovery_floor && min > cfg.collapse_ceiling {
        return Ok(Detection::Attack);
    }
    if probe[cfg.probe_duration / 2..].iter().all(|&a| a < cfg.collapse_ceiling) {
        return Ok(Detection::EnvironmentChange);
    }
    Ok(Detection::Inconclusive)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    /// Drop the orthogonal pair and defend with the imitation attacker.
    EngageImitation,
    /// Turn every defense off and retrain the victim on the new pattern.
    RetrainVictim,
    /// Keep probing for another `probe_duration` slots.
    ExtendProbe,
}

/// What to do after a probe. `extensions_used` counts prior extensions;
/// once exhausted an inconclusive probe leaves the orthogonal defense on.
pub fn respond(decision: Detection, extensions_used: usize, cfg: &DetectionConfig) -> Option<Response> {
    match decision {
        Detection::Attack => Some(Response::EngageImitation),
        Detection::EnvironmentChange => Some(Response::RetrainVictim),
        Detection::Inconclusive if extensions_used < cfg.max_extensions => Some(Response::ExtendProbe),
        Detection::Inconclusive => None,
    }
}
