//! Prediction-quality metrics: aggregate SMAPE and tolerance-based win
//! counting across competing strategies.
//!
//! The accuracy of a fitted curve against ground truth is scored by a
//! symmetric mean absolute percentage error computed as a ratio of sums
//! (not a mean of ratios), which keeps single near-zero points from
//! dominating:
//!
//! ```text
//! SMAPE(Y, Ŷ) = Σᵢ |Ŷᵢ − Yᵢ| / Σᵢ (Yᵢ + Ŷᵢ)
//! ```
//!
//! Actual values must be positive; predictions are clamped to a small
//! positive epsilon so a degenerate model cannot push the denominator to
//! zero. The score lives in [0, 1): 0 is a perfect match and values near 1
//! mean predictions are off by orders of magnitude.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from metric computations.
#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {actual} actual values vs {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("actual values must be positive and finite, got {0}")]
    NonPositiveActual(f64),
    #[error("predictions must be finite, got {0}")]
    NonFinite(f64),
    #[error("tolerance must be non-negative and finite, got {0}")]
    BadTolerance(f64),
    #[error("score table rows must share one length, got {0} and {1}")]
    RaggedTable(usize, usize),
}

/// Knobs for [`smape`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmapeConfig {
    /// Floor applied to each prediction before scoring.
    pub epsilon: f64,
}

impl Default for SmapeConfig {
    fn default() -> Self {
        Self { epsilon: 1e-12 }
    }
}

/// Ratio-of-sums symmetric mean absolute percentage error of `predicted`
/// against `actual`.
///
/// Each prediction is clamped to at least `config.epsilon` first; actual
/// values must be positive and finite as-is.
pub fn smape(actual: &[f64], predicted: &[f64], config: SmapeConfig) -> Result<f64, MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut abs_diff = 0.0;
    let mut sum = 0.0;
    for (&y, &y_hat) in actual.iter().zip(predicted) {
        if !(y > 0.0 && y.is_finite()) {
            return Err(MetricError::NonPositiveActual(y));
        }
        if !y_hat.is_finite() {
            return Err(MetricError::NonFinite(y_hat));
        }
        let y_hat = y_hat.max(config.epsilon);
        abs_diff += (y_hat - y).abs();
        sum += y + y_hat;
    }
    Ok(abs_diff / sum)
}

/// Counts, per competitor, how many table rows it "wins" within a relative
/// tolerance.
///
/// `scores[row][competitor]` holds one score per competitor for one
/// benchmark cell; lower is better. In each row every competitor whose score
/// is at most (1 + tolerance)·(row minimum) earns one win, so several
/// competitors can win the same row. NaN scores never win and never set the
/// row minimum; a row with no finite score awards nothing.
pub fn count_wins(scores: &[Vec<f64>], tolerance: f64) -> Result<Vec<u64>, MetricError> {
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(MetricError::BadTolerance(tolerance));
    }
    if scores.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let width = scores[0].len();
    if width == 0 {
        return Err(MetricError::EmptyInput);
    }
    let mut wins = vec![0u64; width];
    for row in scores {
        if row.len() != width {
            return Err(MetricError::RaggedTable(width, row.len()));
        }
        let best = row.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            continue;
        }
        let cutoff = (1.0 + tolerance) * best;
        for (w, &v) in wins.iter_mut().zip(row) {
            if !v.is_nan() && v <= cutoff {
                *w += 1;
            }
        }
    }
    Ok(wins)
}
