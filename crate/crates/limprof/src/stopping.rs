//! Per-probe early stopping: decide when enough per-sample runtimes have been
//! observed, via a Student-t confidence interval on the mean.
//!
//! ```text
//! CI width = 2 · t_{(1+confidence)/2, n−1} · √(s² / n)
//! stop     ⇔ n ≥ min_samples ∧ (width < λ·mean ∨ n ≥ max_samples)
//! ```
//!
//! The running mean/variance use Welford accumulation, so feeding samples one
//! at a time is numerically stable and O(1) per sample; the rule is evaluated
//! after every sample once `min_samples` is reached.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::student_t_quantile;

/// Errors from stream statistics and the stopping rule.
#[derive(Debug, Error)]
pub enum StoppingError {
    #[error("empty sample stream")]
    EmptyInput,
    #[error("confidence interval needs at least 2 samples, got {0}")]
    TooFewSamples(u64),
    #[error("mean runtime must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("invalid stopping rule: {0}")]
    InvalidRule(String),
}

// ─── Running statistics ───

/// Online mean and unbiased sample variance (Welford's method).
///
/// `push` maintains the running mean and the sum of squared deviations `m2`
/// without ever forming Σx² − n·x̄², so constant streams report exactly zero
/// variance and near-constant streams don't cancel catastrophically.
#[derive(Debug, Clone, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds stats from a slice in one pass. Errors on an empty slice.
    pub fn from_samples(samples: &[f64]) -> Result<Self, StoppingError> {
        if samples.is_empty() {
            return Err(StoppingError::EmptyInput);
        }
        let mut s = Self::new();
        for &x in samples {
            s.push(x);
        }
        Ok(s)
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Mean of the samples seen so far (0 before the first sample).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance s² = m2/(n−1); zero while n < 2.
    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// One-shot (mean, unbiased variance, n) over a sample list.
pub fn running_stats(samples: &[f64]) -> Result<(f64, f64, u64), StoppingError> {
    let s = RunningStats::from_samples(samples)?;
    Ok((s.mean(), s.sample_variance(), s.count()))
}

// ─── Confidence interval ───

/// Width |b − a| of the two-sided t confidence interval of the mean:
/// `2 · t_{(1+confidence)/2, n−1} · √(variance / n)`.
///
/// The width does not depend on the mean itself, only on the spread and n.
pub fn ci_width(variance: f64, n: u64, confidence_level: f64) -> Result<f64, StoppingError> {
    if n < 2 {
        return Err(StoppingError::TooFewSamples(n));
    }
    if !(0.0 < confidence_level && confidence_level < 1.0) {
        return Err(StoppingError::InvalidRule(format!(
            "confidence_level must be in (0,1), got {confidence_level}"
        )));
    }
    if !(variance >= 0.0) {
        return Err(StoppingError::InvalidRule(format!(
            "variance must be non-negative, got {variance}"
        )));
    }
    let p = 0.5 * (1.0 + confidence_level);
    let t = student_t_quantile(p, (n - 1) as f64);
    Ok(2.0 * t * (variance / n as f64).sqrt())
}

// ─── Stopping rule ───

/// Early-termination rule for one probe's sample stream.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StoppingRule {
    /// Confidence level of the t interval (typically 0.95 or 0.995).
    pub confidence_level: f64,
    /// Stop once the CI width drops below `lambda · mean`.
    pub lambda: f64,
    /// Gate: the rule never fires before this many samples.
    pub min_samples: u64,
    /// Cap: the rule always fires at this many samples, whatever the CI says.
    pub max_samples: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            confidence_level: 0.95,
            lambda: 0.10,
            min_samples: 30,
            max_samples: 10_000,
        }
    }
}

impl StoppingRule {
    /// A rule that always takes exactly `n` samples (min = max = n), useful
    /// for fixed-sample-size baselines.
    pub fn fixed(n: u64) -> Self {
        Self {
            min_samples: n.max(2),
            max_samples: n.max(2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), StoppingError> {
        if !(0.0 < self.confidence_level && self.confidence_level < 1.0) {
            return Err(StoppingError::InvalidRule(format!(
                "confidence_level must be in (0,1), got {}",
                self.confidence_level
            )));
        }
        if !(0.0 < self.lambda && self.lambda < 1.0) {
            return Err(StoppingError::InvalidRule(format!(
                "lambda must be in (0,1), got {}",
                self.lambda
            )));
        }
        if self.min_samples < 2 {
            return Err(StoppingError::InvalidRule(format!(
                "min_samples must be at least 2 (t statistic needs df >= 1), got {}",
                self.min_samples
            )));
        }
        if self.min_samples > self.max_samples {
            return Err(StoppingError::InvalidRule(format!(
                "min_samples ({}) exceeds max_samples ({})",
                self.min_samples, self.max_samples
            )));
        }
        Ok(())
    }

    /// CI width of the mean under this rule's confidence level.
    pub fn ci_width(&self, stats: &RunningStats) -> Result<f64, StoppingError> {
        ci_width(stats.sample_variance(), stats.count(), self.confidence_level)
    }

    /// True iff `n ≥ min_samples ∧ (ci_width < λ·mean ∨ n ≥ max_samples)`.
    ///
    /// The cap branch is checked before the CI so fixed-sample rules
    /// (min = max = n) never pay for a quantile evaluation.
    pub fn should_stop(&self, stats: &RunningStats) -> Result<bool, StoppingError> {
        if stats.count() == 0 {
            return Err(StoppingError::EmptyInput);
        }
        if stats.mean() <= 0.0 {
            return Err(StoppingError::NonPositiveMean(stats.mean()));
        }
        if stats.count() < self.min_samples {
            return Ok(false);
        }
        if stats.count() >= self.max_samples {
            return Ok(true);
        }
        Ok(self.ci_width(stats)? < self.lambda * stats.mean())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_sequence() {
        let (mean, var, n) = running_stats(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((mean, var, n), (2.0, 0.0, 3));
    }

    #[test]
    fn hand_computed_variance() {
        // [1,2,3,4]: mean 2.5, unbiased variance 5/3.
        let (mean, var, n) = running_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mean, 2.5);
        assert_relative_eq!(var, 5.0 / 3.0, max_relative = 1e-15);
        assert_eq!(n, 4);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(running_stats(&[]), Err(StoppingError::EmptyInput)));
    }

    /// 10⁶ samples of 1.0 ± 1e−9 (alternating): the naive Σx² − n·x̄² form
    /// would cancel catastrophically; Welford must agree with an exact
    /// two-pass computation to 1e−12 relative.
    #[test]
    fn no_catastrophic_cancellation_on_tiny_deviations() {
        let n = 1_000_000usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| 1.0 + if i % 2 == 0 { 1e-9 } else { -1e-9 })
            .collect();
        let (mean, var, _) = running_stats(&samples).unwrap();

        // Two-pass oracle: exact mean, then centered squared deviations.
        let two_pass_mean = samples.iter().sum::<f64>() / n as f64;
        let two_pass_var = samples
            .iter()
            .map(|x| (x - two_pass_mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;

        assert_relative_eq!(mean, two_pass_mean, max_relative = 1e-12);
        assert_relative_eq!(var, two_pass_var, max_relative = 1e-12);
        // Alternating ±1e−9 has variance ≈ 1e−18 (n/(n−1) corrected).
        assert_relative_eq!(var, 1e-18 * n as f64 / (n - 1) as f64, max_relative = 1e-9);
    }

    #[test]
    fn ci_width_frozen_values() {
        // n=2, confidence 95%: t(df=1) = 12.706205 → width 2·t·√(1/2).
        let w = ci_width(1.0, 2, 0.95).unwrap();
        assert_relative_eq!(w, 17.9692870646, max_relative = 1e-9);
        // n=31, confidence 95%, variance 4: t(df=30) = 2.042272 → 1.4672118.
        let w = ci_width(4.0, 31, 0.95).unwrap();
        assert_relative_eq!(w, 1.4672118453, max_relative = 1e-9);
    }

    #[test]
    fn ci_width_zero_variance_and_arg_checks() {
        assert_eq!(ci_width(0.0, 10, 0.95).unwrap(), 0.0);
        assert!(matches!(ci_width(1.0, 1, 0.95), Err(StoppingError::TooFewSamples(1))));
        assert!(ci_width(1.0, 5, 1.2).is_err());
        assert!(ci_width(-0.5, 5, 0.95).is_err());
    }

    #[test]
    fn min_sample_gate_holds_even_with_zero_variance() {
        let rule = StoppingRule::default();
        let stats = RunningStats::from_samples(&[1.0; 5]).unwrap();
        assert!(!rule.should_stop(&stats).unwrap());
    }

    #[test]
    fn constant_samples_fire_exactly_at_the_gate() {
        let rule = StoppingRule::default();
        let mut stats = RunningStats::new();
        for i in 1..=rule.min_samples {
            stats.push(3.5);
            let stop = rule.should_stop(&stats).unwrap();
            assert_eq!(stop, i >= rule.min_samples, "wrong decision at n={i}");
        }
    }

    #[test]
    fn cap_fires_regardless_of_spread() {
        let rule = StoppingRule {
            lambda: 1e-9,
            min_samples: 2,
            max_samples: 4,
            ..StoppingRule::default()
        };
        let stats = RunningStats::from_samples(&[1.0, 5.0, 2.0, 9.0]).unwrap();
        assert!(rule.should_stop(&stats).unwrap());
    }

    #[test]
    fn non_positive_mean_rejected() {
        let rule = StoppingRule::default();
        let stats = RunningStats::from_samples(&[-1.0, -2.0]).unwrap();
        assert!(matches!(
            rule.should_stop(&stats),
            Err(StoppingError::NonPositiveMean(_))
        ));
    }

    #[test]
    fn rule_validation() {
        assert!(StoppingRule::default().validate().is_ok());
        assert!(StoppingRule { lambda: 0.0, ..Default::default() }.validate().is_err());
        assert!(StoppingRule { confidence_level: 1.0, ..Default::default() }.validate().is_err());
        assert!(StoppingRule { min_samples: 1, ..Default::default() }.validate().is_err());
        assert!(
            StoppingRule { min_samples: 50, max_samples: 10, ..Default::default() }
                .validate()
                .is_err()
        );
    }

    /// Tighter λ must require at least as many samples on the same stream.
    #[test]
    fn smaller_lambda_needs_more_samples() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = rand_distr::Normal::new(1.0_f64, 0.2).unwrap();
        let stream: Vec<f64> = (0..20_000).map(|_| normal.sample(&mut rng).max(1e-6)).collect();

        let stop_index = |lambda: f64| -> u64 {
            let rule = StoppingRule { lambda, ..StoppingRule::default() };
            let mut stats = RunningStats::new();
            for &x in &stream {
                stats.push(x);
                if rule.should_stop(&stats).unwrap() {
                    return stats.count();
                }
            }
            stats.count()
        };

        assert!(stop_index(0.02) > stop_index(0.10));
    }
}
