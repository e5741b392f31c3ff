//! Hidden round-robin channel process.
//!
//! The environment is a Markov chain over `N` states. In each slot it moves
//! to the next state with probability `switch_prob` and otherwise stays.
//! Each state marks exactly `n_good` channels as good.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// How a state index maps to its set of good channels (before permutation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GoodSetMapping {
    /// `{s, s+1, ..., s+k-1} mod N`.
    #[default]
    Contiguous,
    /// `k` channels evenly spread around the ring starting at `s`.
    Spread,
}

impl GoodSetMapping {
    fn base_channels(self, state: usize, n: usize, k: usize) -> impl Iterator<Item = usize> {
        let stride = match self {
            GoodSetMapping::Contiguous => 1,
            GoodSetMapping::Spread => (n / k).max(1),
        };
        (0..k).map(move |j| (state + j * stride) % n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelStateVector {
    pub states: Vec<bool>,
}

impl ChannelStateVector {
    pub fn is_good(&self, channel: usize) -> bool {
        self.states[channel]
    }

    pub fn good_count(&self) -> usize {
        self.states.iter().filter(|&&g| g).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionKind {
    Success,
    FailBadChannel,
    FailJammed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmissionOutcome {
    pub kind: TransmissionKind,
    /// Channel state before jamming is applied.
    pub was_good_pre_jam: bool,
}

impl TransmissionOutcome {
    pub fn success(&self) -> bool {
        self.kind == TransmissionKind::Success
    }
}

#[derive(Debug, Clone)]
pub struct ChannelPattern {
    n_channels: usize,
    n_good: usize,
    switch_prob: f64,
    state_index: usize,
    mapping: GoodSetMapping,
    permutation: Vec<usize>,
    rng: SimRng,
}

impl ChannelPattern {
    pub fn new(
        n_channels: usize,
        n_good: usize,
        switch_prob: f64,
        mapping: GoodSetMapping,
        rng: SimRng,
    ) -> Result<Self> {
        if n_good == 0 || n_good >= n_channels {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n_good < n_channels, got n_good={n_good}, n_channels={n_channels}"
            )));
        }
        if !(0.0..=1.0).contains(&switch_prob) {
            return Err(Error::InvalidConfig(format!("switch_prob {switch_prob} outside [0, 1]")));
        }
        Ok(Self {
            n_channels,
            n_good,
            switch_prob,
            state_index: 0,
            mapping,
            permutation: (0..n_channels).collect(),
            rng,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_good(&self) -> usize {
        self.n_good
    }

    pub fn n_states(&self) -> usize {
        self.n_channels
    }

    pub fn state_index(&self) -> usize {
        self.state_index
    }

    pub fn set_state_index(&mut self, state: usize) -> Result<()> {
        if state >= self.n_states() {
            return Err(Error::InvalidConfig(format!("state {state} >= {}", self.n_states())));
        }
        self.state_index = state;
        Ok(())
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Replaces the channel relabelling. Used to model an environment change.
    pub fn set_permutation(&mut self, permutation: Vec<usize>) -> Result<()> {
        let n = self.n_channels;
        let mut seen = vec![false; n];
        if permutation.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: permutation.len() });
        }
        for &p in &permutation {
            if p >= n || seen[p] {
                return Err(Error::InvalidConfig("permutation is not a bijection".into()));
            }
            seen[p] = true;
        }
        self.permutation = permutation;
        Ok(())
    }

    /// One slot of the Markov chain; returns the resulting channel states.
    pub fn advance(&mut self) -> ChannelStateVector {
        if self.rng.gen::<f64>() < self.switch_prob {
            self.state_index = (self.state_index + 1) % self.n_states();
        }
        self.states()
    }

    pub fn good_set(&self) -> Vec<usize> {
        self.mapping
            .base_channels(self.state_index, self.n_channels, self.n_good)
            .map(|c| self.permutation[c])
            .collect()
    }

    pub fn states(&self) -> ChannelStateVector {
        let mut states = vec![false; self.n_channels];
        for c in self.good_set() {
            states[c] = true;
        }
        ChannelStateVector { states }
    }

    pub fn is_good(&self, channel: usize) -> bool {
        self.good_set().contains(&channel)
    }

    pub fn transmit(&self, victim_channel: usize, jammed_channel: Option<usize>) -> Result<TransmissionOutcome> {
        let n = self.n_channels;
        if victim_channel >= n {
            return Err(Error::ChannelOutOfRange { index: victim_channel, n_channels: n });
        }
        if let Some(j) = jammed_channel {
            if j >= n {
                return Err(Error::ChannelOutOfRange { index: j, n_channels: n });
            }
        }
        let good = self.is_good(victim_channel);
        let kind = if jammed_channel == Some(victim_channel) {
            TransmissionKind::FailJammed
        } else if good {
            TransmissionKind::Success
        } else {
            TransmissionKind::FailBadChannel
        };
        Ok(TransmissionOutcome { kind, was_good_pre_jam: good })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn env(p: f64) -> ChannelPattern {
        ChannelPattern::new(16, 2, p, GoodSetMapping::Contiguous, stream(1, Stream::Environment)).unwrap()
    }

    #[test]
    fn rho_zero_never_moves() {
        let mut e = env(0.0);
        e.set_state_index(5).unwrap();
        for _ in 0..1000 {
            e.advance();
            assert_eq!(e.state_index(), 5);
        }
    }

    #[test]
    fn rho_one_steps_deterministically() {
        let mut e = env(1.0);
        let seq: Vec<usize> = (0..3).map(|_| { e.advance(); e.state_index() }).collect();
        assert_eq!(seq, vec![1, 2, 3]);
    }

    #[test]
    fn empirical_switch_fraction() {
        let mut e = env(0.95);
        let mut moves = 0;
        let steps = 100_000;
        for _ in 0..steps {
            let before = e.state_index();
            e.advance();
            if e.state_index() != before {
                moves += 1;
            }
        }
        let frac = moves as f64 / steps as f64;
        assert!((frac - 0.95).abs() < 0.01, "{frac}");
    }

    #[test]
    fn stationary_distribution_is_uniform() {
        let mut e = env(0.95);
        let steps = 160_000;
        let mut counts = [0usize; 16];
        for _ in 0..steps {
            e.advance();
            counts[e.state_index()] += 1;
        }
        // Round-robin visits are strongly autocorrelated, so use a loose
        // 3-sigma band on the per-state binomial count.
        let expected = steps as f64 / 16.0;
        let sigma = (steps as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn good_set_mapping_and_wraparound() {
        let mut e = env(0.0);
        assert_eq!(e.good_set(), vec![0, 1]);
        e.set_state_index(15).unwrap();
        assert_eq!(e.good_set(), vec![15, 0]);
        assert_eq!(e.states().good_count(), 2);
    }

    #[test]
    fn permuted_good_set_is_image_of_plain_set() {
        let mut e = env(0.0);
        e.set_state_index(4).unwrap();
        let plain = e.good_set();
        let perm: Vec<usize> = (0..16).map(|i| (i * 5 + 3) % 16).collect();
        e.set_permutation(perm.clone()).unwrap();
        let shuffled = e.good_set();
        assert_eq!(shuffled, plain.iter().map(|&c| perm[c]).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_permutation() {
        let mut e = env(0.0);
        assert!(e.set_permutation(vec![0; 16]).is_err());
        assert!(e.set_permutation((0..15).collect()).is_err());
    }

    #[test]
    fn transmit_cases() {
        let e = env(0.0); // good = {0, 1}
        assert_eq!(e.transmit(0, None).unwrap().kind, TransmissionKind::Success);
        let jammed = e.transmit(1, Some(1)).unwrap();
        assert_eq!(jammed.kind, TransmissionKind::FailJammed);
        assert!(jammed.was_good_pre_jam);
        let bad = e.transmit(7, Some(0)).unwrap();
        assert_eq!(bad.kind, TransmissionKind::FailBadChannel);
        assert!(!bad.was_good_pre_jam);
        assert!(e.transmit(16, None).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ChannelPattern::new(4, 4, 0.5, GoodSetMapping::Contiguous, stream(0, Stream::Environment)).is_err());
        assert!(ChannelPattern::new(4, 0, 0.5, GoodSetMapping::Contiguous, stream(0, Stream::Environment)).is_err());
        assert!(ChannelPattern::new(4, 1, 1.5, GoodSetMapping::Contiguous, stream(0, Stream::Environment)).is_err());
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let mut a = env(0.5);
        let mut b = env(0.5);
        for _ in 0..5000 {
            assert_eq!(a.advance(), b.advance());
        }
    }
}
