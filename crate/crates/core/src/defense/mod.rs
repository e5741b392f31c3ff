//! Victim-side defenses against the DRL jammer.

pub mod imitation;
pub mod orthogonal;
pub mod pid;

use rand::Rng;

use crate::error::{Error, Result};

/// Channels ordered by descending score; ties keep the lower index first.
pub fn rank_channels(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order
}

pub(crate) fn check_distribution(probs: &[f64], tol: f64) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidProbabilities("negative or non-finite entry".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Inverse-CDF draw of an index from `probs`.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Samples a rank from `probs` and returns the channel holding that rank.
pub fn diversified_select<R: Rng + ?Sized>(ranked_channels: &[usize], probs: &[f64], rng: &mut R) -> Result<usize> {
    if ranked_channels.len() != probs.len() {
        return Err(Error::DimensionMismatch { expected: ranked_channels.len(), got: probs.len() });
    }
    check_distribution(probs, 1e-9)?;
    Ok(ranked_channels[sample_index(probs, rng)])
}

/// Clamps negatives to zero and rescales to unit sum. `None` when nothing
/// positive is left.
pub fn normalize_clamped(values: &[f64]) -> Option<Vec<f64>> {
    let clamped: Vec<f64> = values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let sum: f64 = clamped.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        Some(clamped.into_iter().map(|v| v / sum).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranking_is_descending_with_stable_ties() {
        assert_eq!(rank_channels(&[0.1, 0.5, 0.2, 0.5]), vec![1, 3, 2, 0]);
    }

    #[test]
    fn one_hot_always_top() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ranked = [4, 2, 0, 1, 3];
        for _ in 0..1000 {
            assert_eq!(diversified_select(&ranked, &[1.0, 0.0, 0.0, 0.0, 0.0], &mut rng).unwrap(), 4);
        }
    }

    fn rank_frequencies(probs: &[f64], draws: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ranked: Vec<usize> = (0..probs.len()).rev().collect();
        let mut counts = vec![0usize; probs.len()];
        for _ in 0..draws {
            let ch = diversified_select(&ranked, probs, &mut rng).unwrap();
            counts[probs.len() - 1 - ch] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn uniform_probs_give_uniform_ranks() {
        let probs = vec![1.0 / 16.0; 16];
        for f in rank_frequencies(&probs, 100_000) {
            assert!((f - 1.0 / 16.0).abs() < 0.02);
        }
    }

    #[test]
    fn multinomial_frequencies_match() {
        let mut probs = vec![0.0; 16];
        probs[..3].copy_from_slice(&[0.5, 0.3, 0.2]);
        for (f, p) in rank_frequencies(&probs, 100_000).iter().zip(&probs) {
            assert!((f - p).abs() < 0.02);
        }
    }

    #[test]
    fn rejects_malformed_probs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(diversified_select(&[0, 1], &[0.7, 0.7], &mut rng).is_err());
        assert!(diversified_select(&[0, 1], &[1.5, -0.5], &mut rng).is_err());
        assert!(diversified_select(&[0, 1], &[1.0], &mut rng).is_err());
    }
}
