//! Bayesian-optimization next-probe proposals: a Gaussian-process surrogate
//! over a target-closeness score, maximized by expected improvement.
//!
//! Each observed (limit, mean runtime) pair is scored against the target t:
//!
//! ```text
//! y(r) = r/t     if r ≤ t      (meets the target; better the closer to t)
//!      = −r/t    otherwise     (misses the target; penalized past −1)
//! ```
//!
//! so the global maximum of y over the grid sits at the *cheapest* limit that
//! still meets the target — exactly the quantity being searched for. A
//! zero-mean GP with a Matérn-5/2 kernel models y over limits rescaled to
//! [0, 1]; the kernel length scale is picked from {0.1, 0.25, 0.5} by log
//! marginal likelihood, and the next probe is the unprofiled grid limit with
//! the highest expected improvement over the best observed score. When every
//! EI underflows to zero (routine early on, when all observations sit far
//! from the incumbent), the proposal falls back to the highest posterior
//! variance — pure exploration — which for a single observation means the
//! grid point farthest from it.

use serde::Serialize;

use super::{LimitGrid, SelectionError};
use crate::model::ProfilePoint;
use crate::special::{normal_cdf, normal_pdf};

/// Candidate length scales, in evaluation order; ties keep the earliest.
pub const LENGTH_SCALES: [f64; 3] = [0.25, 0.1, 0.5];

/// Observation noise variance σₙ² added to the kernel diagonal.
const NOISE_VARIANCE: f64 = 1e-4;

/// Floor for the signal variance when the observed scores barely vary.
const SIGNAL_VARIANCE_FLOOR: f64 = 1e-6;

/// Diagonal jitter escalation (as fractions of the signal variance) tried
/// when the Cholesky factorization fails.
const JITTER_FRACTIONS: [f64; 4] = [0.0, 1e-8, 1e-7, 1e-6];

/// Target-closeness score of a runtime: positive and increasing toward 1
/// while the target is met, negative (below −1) once it is missed.
pub fn bo_transform(runtime: f64, target: f64) -> f64 {
    if runtime <= target {
        runtime / target
    } else {
        -(runtime / target)
    }
}

/// Posterior diagnostics for one unprofiled grid limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoCandidate {
    pub limit: f64,
    pub posterior_mean: f64,
    pub posterior_std: f64,
    pub expected_improvement: f64,
}

// ─── Gaussian process internals ───

/// Matérn-5/2 covariance at distance `dist` (already in scaled input space).
fn matern52(dist: f64, lengthscale: f64, signal_variance: f64) -> f64 {
    let rho = 5.0_f64.sqrt() * dist.abs() / lengthscale;
    signal_variance * (1.0 + rho + rho * rho / 3.0) * (-rho).exp()
}

/// Cholesky factorization of a flat row-major n×n matrix; None when the
/// matrix is not numerically positive definite.
fn cholesky(k: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i * n + j];
            for m in 0..j {
                s -= l[i * n + m] * l[j * n + m];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves L·x = b (forward substitution) for lower-triangular flat L.
fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * n + j] * x[j];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solves Lᵀ·x = b (backward substitution) for lower-triangular flat L.
fn solve_lower_transpose(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l[j * n + i] * x[j];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

struct GpFit {
    xs: Vec<f64>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    lengthscale: f64,
    signal_variance: f64,
    log_marginal_likelihood: f64,
}

impl GpFit {
    /// Posterior mean and standard deviation at a scaled input.
    fn posterior(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let kstar: Vec<f64> = self
            .xs
            .iter()
            .map(|&xi| matern52(x - xi, self.lengthscale, self.signal_variance))
            .collect();
        let mean: f64 = kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = solve_lower(&self.chol, n, &kstar);
        let var = self.signal_variance - v.iter().map(|vi| vi * vi).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }
}

/// Fits the GP for one length scale, escalating diagonal jitter until the
/// kernel matrix factors.
fn fit_lengthscale(
    xs: &[f64],
    ys: &[f64],
    lengthscale: f64,
    signal_variance: f64,
) -> Option<GpFit> {
    let n = xs.len();
    for &jf in &JITTER_FRACTIONS {
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = matern52(xs[i] - xs[j], lengthscale, signal_variance);
            }
            k[i * n + i] += NOISE_VARIANCE + jf * signal_variance;
        }
        if let Some(chol) = cholesky(&k, n) {
            let alpha = solve_lower_transpose(&chol, n, &solve_lower(&chol, n, ys));
            let data_fit: f64 = ys.iter().zip(&alpha).map(|(y, a)| y * a).sum();
            let log_det: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum::<f64>() * 2.0;
            let lml = -0.5 * data_fit
                - 0.5 * log_det
                - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            if lml.is_finite() {
                return Some(GpFit {
                    xs: xs.to_vec(),
                    chol,
                    alpha,
                    lengthscale,
                    signal_variance,
                    log_marginal_likelihood: lml,
                });
            }
        }
    }
    None
}

fn fit_gp(xs: &[f64], ys: &[f64]) -> Result<GpFit, SelectionError> {
    let n = ys.len() as f64;
    let variance = if ys.len() < 2 {
        0.0
    } else {
        let mean = ys.iter().sum::<f64>() / n;
        ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let signal_variance = variance.max(SIGNAL_VARIANCE_FLOOR);

    let mut best: Option<GpFit> = None;
    for &ls in &LENGTH_SCALES {
        if let Some(fitted) = fit_lengthscale(xs, ys, ls, signal_variance) {
            let better = best
                .as_ref()
                .is_none_or(|b| fitted.log_marginal_likelihood > b.log_marginal_likelihood);
            if better {
                best = Some(fitted);
            }
        }
    }
    best.ok_or_else(|| {
        SelectionError::Numerical(
            "kernel matrix failed to factor at every length scale and jitter level".into(),
        )
    })
}

// ─── Public surface ───

/// Posterior mean/std and expected improvement for every *unprofiled* grid
/// limit, in grid order. Exposed as a diagnostic so the acquisition surface
/// can be inspected and plotted.
pub fn bo_landscape(
    grid: &LimitGrid,
    observed: &[ProfilePoint],
    target: f64,
    profiled: &[bool],
) -> Result<Vec<BoCandidate>, SelectionError> {
    if observed.is_empty() {
        return Err(SelectionError::NoObservations);
    }
    if profiled.len() != grid.len() {
        return Err(SelectionError::InvalidGrid(format!(
            "profiled mask has {} entries for a {}-point grid",
            profiled.len(),
            grid.len()
        )));
    }
    let span = grid.l_max() - grid.l_min();
    let scale = |limit: f64| (limit - grid.l_min()) / span;

    let xs: Vec<f64> = observed.iter().map(|p| scale(p.cpu_limit)).collect();
    let ys: Vec<f64> = observed.iter().map(|p| bo_transform(p.mean_runtime, target)).collect();
    let gp = fit_gp(&xs, &ys)?;

    let best_y = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for idx in 0..grid.len() {
        if profiled[idx] {
            continue;
        }
        let limit = grid.limit_at(idx);
        let (mean, std) = gp.posterior(scale(limit));
        let ei = if std > 0.0 {
            let z = (mean - best_y) / std;
            (mean - best_y) * normal_cdf(z) + std * normal_pdf(z)
        } else {
            (mean - best_y).max(0.0)
        };
        out.push(BoCandidate {
            limit,
            posterior_mean: mean,
            posterior_std: std,
            expected_improvement: ei.max(0.0),
        });
    }
    Ok(out)
}

/// Next probe: the unprofiled limit with the highest expected improvement;
/// when EI underflows to zero everywhere, the highest posterior variance.
/// Ties break toward the smaller limit in both phases.
pub fn propose(
    grid: &LimitGrid,
    observed: &[ProfilePoint],
    target: f64,
    profiled: &[bool],
) -> Result<f64, SelectionError> {
    let landscape = bo_landscape(grid, observed, target, profiled)?;
    let Some(first) = landscape.first() else {
        return Err(SelectionError::Exhausted);
    };

    let mut best = first;
    for cand in &landscape[1..] {
        if cand.expected_improvement > best.expected_improvement {
            best = cand;
        }
    }
    if best.expected_improvement > 0.0 {
        return Ok(best.limit);
    }

    let mut widest = first;
    for cand in &landscape[1..] {
        if cand.posterior_std > widest.posterior_std {
            widest = cand;
        }
    }
    Ok(widest.limit)
}
