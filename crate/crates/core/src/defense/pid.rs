//! Diversified channel selection with PID-style reweighting.
//!
//! The victim ranks channels by its actor scores and picks a rank from a
//! probability array. Success counts over short, long and lagged windows
//! shift that array: with `K(i)` increasing in rank, a run of successes
//! moves mass toward lower-ranked channels and a run of failures moves it
//! back to the top.

use serde::{Deserialize, Serialize};

use crate::defense::normalize_clamped;
use crate::error::{Error, Result};
use crate::victim::SuccessHistory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidConfig {
    pub base_probs: Vec<f64>,
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub kd: Vec<f64>,
    pub short_window: usize,
    pub long_window: usize,
    pub diff_window: usize,
}

const DEFAULT_BASE: [f64; 10] = [0.55, 0.15, 0.10, 0.07, 0.05, 0.03, 0.02, 0.01, 0.01, 0.01];

impl PidConfig {
    pub fn default_for(n_channels: usize) -> Self {
        let mut base = vec![0.0; n_channels];
        for (b, d) in base.iter_mut().zip(DEFAULT_BASE) {
            *b = d;
        }
        let sum: f64 = base.iter().sum();
        base.iter_mut().for_each(|b| *b /= sum);
        let ramp = |scale: f64| -> Vec<f64> {
            let denom = (n_channels.max(2) - 1) as f64;
            (0..n_channels).map(|i| scale * i as f64 / denom).collect()
        };
        Self {
            base_probs: base,
            kp: ramp(2e-3),
            ki: ramp(2e-4),
            kd: ramp(5e-4),
            short_window: 10,
            long_window: 200,
            diff_window: 400,
        }
    }

    pub fn n_ranks(&self) -> usize {
        self.base_probs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.base_probs.len();
        for (name, v) in [("kp", &self.kp), ("ki", &self.ki), ("kd", &self.kd)] {
            if v.len() != n {
                return Err(Error::InvalidConfig(format!("{name} has {} entries, expected {n}", v.len())));
            }
            if v.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidConfig(format!("{name} must be non-decreasing in rank")));
            }
        }
        crate::defense::check_distribution(&self.base_probs, 1e-9)?;
        if self.base_probs.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig("base_probs must be non-increasing in rank".into()));
        }
        if !(self.short_window <= self.long_window && self.long_window < self.diff_window) {
            return Err(Error::InvalidConfig("need short_window <= long_window < diff_window".into()));
        }
        Ok(())
    }

    /// Unclamped weights `P''(i)` for the current history.
    pub fn raw_weights(&self, history: &SuccessHistory) -> Vec<f64> {
        let short = history.count(0, self.short_window) as f64;
        let long = history.count(0, self.long_window) as f64;
        let older = history.count(self.long_window, self.diff_window) as f64;
        (0..self.n_ranks())
            .map(|i| self.base_probs[i] + self.kp[i] * short + self.ki[i] * long + self.kd[i] * (long - older))
            .collect()
    }

    /// Rank-selection distribution for the next slot.
    pub fn probabilities(&self, history: &SuccessHistory) -> Vec<f64> {
        normalize_clamped(&self.raw_weights(history)).unwrap_or_else(|| self.base_probs.clone())
    }
}
