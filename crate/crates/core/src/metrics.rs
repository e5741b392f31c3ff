//! Summary statistics over accuracy series.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Streaming trailing mean, bit-identical to [`moving_average`].
#[derive(Debug, Clone)]
pub struct RollingMean {
    window: usize,
    values: VecDeque<f64>,
    sum: f64,
}

impl RollingMean {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "window must be positive");
        Self { window, values: VecDeque::with_capacity(window + 1), sum: 0.0 }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        self.sum += x;
        self.values.push_back(x);
        if self.values.len() > self.window {
            self.sum -= self.values.pop_front().expect("non-empty");
        }
        self.sum / self.values.len() as f64
    }
}

/// Trailing moving average; the first `window − 1` points average over
/// what is available so far.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidConfig("moving-average window must be positive".into()));
    }
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut rolling = RollingMean::new(window);
    Ok(series.iter().map(|&x| rolling.push(x)).collect())
}

pub fn mean(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

/// Fraction of samples in each of `bins` equal-width bins over `[0, 1]`.
/// Values outside the range are clamped into the end bins.
pub fn empirical_pdf(series: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bin count must be positive".into()));
    }
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut hist = vec![0.0; bins];
    for &x in series {
        let b = ((x.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        hist[b] += 1.0;
    }
    let n = series.len() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(series: &[f64]) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::EmptySeries);
        }
        let mut sorted = series.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of samples `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// `(value, cumulative fraction)` at every distinct sample value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = (i + 1) as f64 / n,
                _ => out.push((v, (i + 1) as f64 / n)),
            }
        }
        out
    }
}

pub fn empirical_cdf(series: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(series)
}

/// Lengths of maximal runs of `true`.
pub fn run_lengths(flags: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for &f in flags {
        if f {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

/// Most frequent value; ties go to the smaller one.
pub fn mode(values: &[usize]) -> Option<usize> {
    let max = *values.iter().max()?;
    let mut counts = vec![0usize; max + 1];
    values.iter().for_each(|&v| counts[v] += 1);
    let best = *counts.iter().max()?;
    counts.iter().position(|&c| c == best)
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_series() {
        let s = vec![0.3; 50];
        assert!(moving_average(&s, 7).unwrap().iter().all(|&x| (x - 0.3).abs() < 1e-12));
        let cdf = empirical_cdf(&s).unwrap();
        assert_eq!(cdf.eval(0.2999), 0.0);
        assert_eq!(cdf.eval(0.3), 1.0);
    }

    #[test]
    fn two_point_series() {
        let s = [0.0, 1.0, 0.0, 1.0];
        assert_eq!(empirical_cdf(&s).unwrap().eval(0.5), 0.5);
        assert_eq!(empirical_pdf(&s, 2).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn moving_average_window() {
        assert_eq!(moving_average(&[1.0, 0.0, 1.0, 1.0], 2).unwrap(), vec![1.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(moving_average(&[], 3), Err(Error::EmptySeries)));
        assert!(matches!(empirical_pdf(&[], 3), Err(Error::EmptySeries)));
        assert!(matches!(empirical_cdf(&[]), Err(Error::EmptySeries)));
    }

    #[test]
    fn runs_and_mode() {
        let f = [true, false, true, true, false, false, true, true, true, false, true];
        assert_eq!(run_lengths(&f), vec![1, 2, 3, 1]);
        assert_eq!(mode(&run_lengths(&f)), Some(1));
        assert_eq!(mode(&[]), None);
    }

    proptest! {
        #[test]
        fn cdf_monotone_to_one(s in prop::collection::vec(0.0f64..1.0, 1..200)) {
            let cdf = empirical_cdf(&s).unwrap();
            let steps = cdf.steps();
            prop_assert!(steps.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 < w[1].0));
            prop_assert_eq!(steps.last().unwrap().1, 1.0);
            prop_assert_eq!(cdf.eval(-0.1), 0.0);
        }

        #[test]
        fn pdf_sums_to_one(s in prop::collection::vec(0.0f64..=1.0, 1..200), bins in 1usize..60) {
            let p = empirical_pdf(&s, bins).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
