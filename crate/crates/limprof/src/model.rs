//! The tiered parametric runtime model: evaluation, least-squares fitting,
//! and inversion back to a CPU limit.
//!
//! A job's mean per-sample runtime r as a function of its CPU limit R is
//! modeled by one of five nested shapes, picked purely by how many profile
//! points are available (`select_tier`, tier = min(n, 5)):
//!
//! ```text
//! tier 1:  r(R) = R⁻¹                  (no free parameters)
//! tier 2:  r(R) = a·R⁻¹                (linear scaling)
//! tier 3:  r(R) = a·R⁻ᵇ                (sub/super-linear scaling)
//! tier 4:  r(R) = a·R⁻ᵇ + c            (+ CPU-insensitive floor)
//! tier 5:  r(R) = a·(R·d)⁻ᵇ + c        (+ effective-capacity rescale)
//! ```
//!
//! Inactive parameters stay at their neutral values (a = 1, b = 1, c = 0,
//! d = 1) so every tier evaluates through the same closed form. Tier 2 has an
//! exact closed-form least-squares solution; tiers 3–5 are fitted with a
//! damped Gauss–Newton (Levenberg–Marquardt) loop using the analytic
//! Jacobian, parameter box constraints, and — when the residual stays poor —
//! a deterministic multi-start sweep over shape/floor initializations.
//!
//! (a, d) are exactly non-identifiable in tier 5 because a·(R·d)⁻ᵇ =
//! (a·d⁻ᵇ)·R⁻ᵇ; fits are therefore judged on predictions, not raw parameter
//! values, and the damping plus box bounds keep the pair from wandering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::selection::LimitGrid;
use crate::stopping::{ci_width, RunningStats};

/// Errors from model evaluation, fitting, and inversion.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no profile points supplied")]
    EmptyInput,
    #[error("CPU limit must be positive and finite, got {0}")]
    NonPositiveLimit(f64),
    #[error("target runtime must be positive and finite, got {0}")]
    NonPositiveTarget(f64),
    #[error(
        "target runtime {target} is at or below the model's runtime floor c = {floor}; \
         no CPU limit can reach it"
    )]
    TargetUnreachable { target: f64, floor: f64 },
    #[error("invalid profile point: {0}")]
    InvalidPoint(String),
    #[error("profile points share the CPU limit {0}; fit inputs must be distinct")]
    DuplicateLimit(f64),
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
    #[error("fit diverged to a non-finite residual; last finite iterate: {last:?}")]
    FitDiverged { last: RuntimeModel },
}

// ─── Parameter bounds ───

const A_MIN: f64 = 1e-9;
const A_MAX: f64 = 1e9;
const B_MIN: f64 = 1e-3;
const B_MAX: f64 = 10.0;
const D_MIN: f64 = 1e-3;
const D_MAX: f64 = 1e3;

/// Relative-SSR threshold above which the multi-start fallback kicks in.
const MULTISTART_TRIGGER: f64 = 1e-8;

// ─── Profile points ───

/// One profiled grid point: a CPU limit, the mean per-sample runtime measured
/// there, and the dispersion of that measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    /// CPU limit (vCPU cores) the job ran under; grid-aligned by callers.
    pub cpu_limit: f64,
    /// Mean per-sample runtime (seconds) observed at that limit.
    pub mean_runtime: f64,
    /// How many per-sample runtimes the mean aggregates.
    pub n_samples: u64,
    /// Unbiased sample variance of the per-sample runtimes (seconds²).
    pub sample_variance: f64,
    /// Width of the two-sided t confidence interval of the mean (seconds).
    pub ci_width: f64,
}

impl ProfilePoint {
    /// Aggregates raw per-sample runtimes taken at `cpu_limit`, computing the
    /// mean, sample variance, and the t confidence interval of the mean at
    /// `confidence_level`. Needs at least 2 samples.
    pub fn new(cpu_limit: f64, samples: &[f64], confidence_level: f64) -> Result<Self, ModelError> {
        if samples.len() < 2 {
            return Err(ModelError::InvalidPoint(format!(
                "a confidence interval needs at least 2 samples, got {} at limit {cpu_limit}",
                samples.len()
            )));
        }
        let stats = RunningStats::from_samples(samples)
            .expect("length checked above, stream is non-empty");
        let width = ci_width(stats.sample_variance(), stats.count(), confidence_level)
            .map_err(|e| ModelError::InvalidPoint(e.to_string()))?;
        Self::from_parts(cpu_limit, stats.mean(), stats.count(), stats.sample_variance(), width)
    }

    /// Wraps an already-aggregated mean (e.g. read from a trace summary).
    /// The dispersion fields degenerate to zero and n to 1; such points carry
    /// no interval information and exist for offline fitting only.
    pub fn summary(cpu_limit: f64, mean_runtime: f64) -> Result<Self, ModelError> {
        Self::from_parts(cpu_limit, mean_runtime, 1, 0.0, 0.0)
    }

    pub(crate) fn from_parts(
        cpu_limit: f64,
        mean_runtime: f64,
        n_samples: u64,
        sample_variance: f64,
        ci_width: f64,
    ) -> Result<Self, ModelError> {
        if !(cpu_limit > 0.0 && cpu_limit.is_finite()) {
            return Err(ModelError::NonPositiveLimit(cpu_limit));
        }
        if !(mean_runtime > 0.0 && mean_runtime.is_finite()) {
            return Err(ModelError::InvalidPoint(format!(
                "mean runtime must be positive and finite, got {mean_runtime} at limit {cpu_limit}"
            )));
        }
        if n_samples == 0 {
            return Err(ModelError::InvalidPoint(format!(
                "a profile point aggregates at least one sample (limit {cpu_limit})"
            )));
        }
        if !(sample_variance >= 0.0 && sample_variance.is_finite()) {
            return Err(ModelError::InvalidPoint(format!(
                "sample variance must be non-negative and finite, got {sample_variance}"
            )));
        }
        if !(ci_width >= 0.0 && ci_width.is_finite()) {
            return Err(ModelError::InvalidPoint(format!(
                "CI width must be non-negative and finite, got {ci_width}"
            )));
        }
        Ok(Self { cpu_limit, mean_runtime, n_samples, sample_variance, ci_width })
    }
}

// ─── The model ───

/// A fitted (or ground-truth) runtime curve r(R) = a·(R·d)⁻ᵇ + c.
///
/// `tier` records which parameters are active; inactive ones hold their
/// neutral values so `eval` needs no per-tier special cases beyond exactness
/// of the low tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeModel {
    pub tier: u8,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Picks the model tier for a profile of `n_points` points: min(n, 5).
/// An empty profile has no tier and is rejected.
pub fn select_tier(n_points: usize) -> Result<u8, ModelError> {
    if n_points == 0 {
        return Err(ModelError::EmptyInput);
    }
    Ok(n_points.min(5) as u8)
}

impl RuntimeModel {
    /// r(R) = R⁻¹.
    pub fn tier1() -> Self {
        Self { tier: 1, a: 1.0, b: 1.0, c: 0.0, d: 1.0 }
    }

    /// r(R) = a·R⁻¹. Panics if `a` is not positive and finite.
    pub fn tier2(a: f64) -> Self {
        assert!(a > 0.0 && a.is_finite(), "tier 2 needs a > 0, got {a}");
        Self { tier: 2, a, b: 1.0, c: 0.0, d: 1.0 }
    }

    /// r(R) = a·R⁻ᵇ. Panics on non-positive `a` or `b`.
    pub fn tier3(a: f64, b: f64) -> Self {
        assert!(a > 0.0 && a.is_finite(), "tier 3 needs a > 0, got {a}");
        assert!(b > 0.0 && b.is_finite(), "tier 3 needs b > 0, got {b}");
        Self { tier: 3, a, b, c: 0.0, d: 1.0 }
    }

    /// r(R) = a·R⁻ᵇ + c. Panics on non-positive `a`/`b` or negative `c`.
    pub fn tier4(a: f64, b: f64, c: f64) -> Self {
        assert!(a > 0.0 && a.is_finite(), "tier 4 needs a > 0, got {a}");
        assert!(b > 0.0 && b.is_finite(), "tier 4 needs b > 0, got {b}");
        assert!(c >= 0.0 && c.is_finite(), "tier 4 needs c >= 0, got {c}");
        Self { tier: 4, a, b, c, d: 1.0 }
    }

    /// r(R) = a·(R·d)⁻ᵇ + c. Panics on out-of-domain parameters.
    pub fn tier5(a: f64, b: f64, c: f64, d: f64) -> Self {
        assert!(a > 0.0 && a.is_finite(), "tier 5 needs a > 0, got {a}");
        assert!(b > 0.0 && b.is_finite(), "tier 5 needs b > 0, got {b}");
        assert!(c >= 0.0 && c.is_finite(), "tier 5 needs c >= 0, got {c}");
        assert!(d > 0.0 && d.is_finite(), "tier 5 needs d > 0, got {d}");
        Self { tier: 5, a, b, c, d }
    }

    /// Checks a deserialized model: tier in 1..=5, parameters in domain, and
    /// inactive parameters at their neutral values.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(1..=5).contains(&self.tier) {
            return Err(ModelError::InvalidModel(format!(
                "tier must be 1..=5, got {}",
                self.tier
            )));
        }
        let finite_pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidModel(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        finite_pos("a", self.a)?;
        finite_pos("b", self.b)?;
        finite_pos("d", self.d)?;
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(ModelError::InvalidModel(format!(
                "c must be non-negative and finite, got {}",
                self.c
            )));
        }
        let neutral = [
            (self.tier < 2, "a", self.a, 1.0),
            (self.tier < 3, "b", self.b, 1.0),
            (self.tier < 4, "c", self.c, 0.0),
            (self.tier < 5, "d", self.d, 1.0),
        ];
        for (inactive, name, value, expect) in neutral {
            if inactive && value != expect {
                return Err(ModelError::InvalidModel(format!(
                    "parameter {name} is inactive at tier {} and must be {expect}, got {value}",
                    self.tier
                )));
            }
        }
        Ok(())
    }

    /// Predicted mean per-sample runtime at CPU limit `limit`.
    ///
    /// Tiers 1 and 2 use exact division so that e.g. tier 1 at R = 2 yields
    /// exactly 0.5.
    pub fn eval(&self, limit: f64) -> Result<f64, ModelError> {
        if !(limit > 0.0 && limit.is_finite()) {
            return Err(ModelError::NonPositiveLimit(limit));
        }
        Ok(match self.tier {
            1 => 1.0 / limit,
            2 => self.a / limit,
            3 => self.a * limit.powf(-self.b),
            4 => self.a * limit.powf(-self.b) + self.c,
            _ => self.a * (limit * self.d).powf(-self.b) + self.c,
        })
    }

    /// Predictions across every grid point, in grid order.
    pub fn predictions_on(&self, grid: &LimitGrid) -> Result<Vec<f64>, ModelError> {
        (0..grid.len()).map(|i| self.eval(grid.limit_at(i))).collect()
    }

    /// Exact inverse R(t) of the runtime curve, unconstrained by any grid.
    ///
    /// Errors with [`ModelError::TargetUnreachable`] when the target sits at
    /// or below the floor `c` — the curve approaches c asymptotically, so no
    /// finite limit reaches such a target.
    pub fn invert_unclamped(&self, target: f64) -> Result<f64, ModelError> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(ModelError::NonPositiveTarget(target));
        }
        Ok(match self.tier {
            1 => 1.0 / target,
            2 => self.a / target,
            3 => (self.a / target).powf(1.0 / self.b),
            _ => {
                if target <= self.c {
                    return Err(ModelError::TargetUnreachable { target, floor: self.c });
                }
                (self.a / (target - self.c)).powf(1.0 / self.b) / self.d
            }
        })
    }

    /// Smallest grid CPU limit predicted to meet `target`: the exact inverse,
    /// clamped into the grid's range and snapped to its spacing.
    ///
    /// An unreachable target (at or below the floor c) is not an error here:
    /// the inversion saturates at the grid maximum and raises the
    /// `target_unreachable` flag instead, since "give it everything we have"
    /// is the actionable answer.
    pub fn invert(&self, target: f64, grid: &LimitGrid) -> Result<Inversion, ModelError> {
        match self.invert_unclamped(target) {
            Ok(raw) => {
                let clamped = raw.clamp(grid.l_min(), grid.l_max());
                Ok(Inversion { limit: grid.snap(clamped), target_unreachable: false })
            }
            Err(ModelError::TargetUnreachable { .. }) => {
                Ok(Inversion { limit: grid.l_max(), target_unreachable: true })
            }
            Err(e) => Err(e),
        }
    }
}

/// Result of inverting a model onto a limit grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    /// Grid CPU limit predicted to meet the target (grid max if unreachable).
    pub limit: f64,
    /// True iff the target lies at or below the model's runtime floor.
    pub target_unreachable: bool,
}

// ─── Fitting ───

/// A fitted model together with fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub model: RuntimeModel,
    /// ‖residual‖₂ = √(Σᵢ (r̂ᵢ − rᵢ)²) over the fitted points.
    pub residual_norm: f64,
    /// Damped Gauss–Newton iterations spent (0 for the closed-form tiers).
    pub iterations: u64,
}

/// Fits the tier dictated by `points.len()` to the profile.
///
/// Points must carry distinct CPU limits — the probing loop never measures
/// the same grid point twice, so a duplicate here is a caller bug, not data.
///
/// `warm_start` seeds the iterative tiers from a previously fitted model:
/// parameters active in both tiers carry over, newly activated ones start
/// neutral. Without a warm start, the shape parameters start from a curve
/// through the extremes (a = max r · min R, b = 1, c = 0.9·min r for tiers
/// with a floor, d = 1).
pub fn fit(
    points: &[ProfilePoint],
    warm_start: Option<&RuntimeModel>,
) -> Result<FitOutcome, ModelError> {
    let tier = select_tier(points.len())?;
    for (i, p) in points.iter().enumerate() {
        ProfilePoint::from_parts(
            p.cpu_limit,
            p.mean_runtime,
            p.n_samples,
            p.sample_variance,
            p.ci_width,
        )?;
        if points[..i].iter().any(|q| (q.cpu_limit - p.cpu_limit).abs() <= 1e-9) {
            return Err(ModelError::DuplicateLimit(p.cpu_limit));
        }
    }
    match tier {
        1 => {
            let model = RuntimeModel::tier1();
            Ok(FitOutcome { model, residual_norm: ssr(&model, points).sqrt(), iterations: 0 })
        }
        2 => {
            // Σ(rᵢ − a/Rᵢ)² is quadratic in a: a* = Σ(rᵢ/Rᵢ) / Σ(1/Rᵢ²).
            let num: f64 = points.iter().map(|p| p.mean_runtime / p.cpu_limit).sum();
            let den: f64 = points.iter().map(|p| 1.0 / (p.cpu_limit * p.cpu_limit)).sum();
            let a = (num / den).clamp(A_MIN, A_MAX);
            let model = RuntimeModel::tier2(a);
            Ok(FitOutcome { model, residual_norm: ssr(&model, points).sqrt(), iterations: 0 })
        }
        _ => fit_iterative(tier, points, warm_start),
    }
}

fn ssr(model: &RuntimeModel, points: &[ProfilePoint]) -> f64 {
    points
        .iter()
        .map(|p| {
            let e = model.eval(p.cpu_limit).expect("validated point limits are positive");
            (e - p.mean_runtime).powi(2)
        })
        .sum()
}

fn unpack(tier: u8, p: &[f64]) -> RuntimeModel {
    let mut m = RuntimeModel { tier, a: p[0], b: p[1], c: 0.0, d: 1.0 };
    if tier >= 4 {
        m.c = p[2];
    }
    if tier >= 5 {
        m.d = p[3];
    }
    m
}

fn active_count(tier: u8) -> usize {
    match tier {
        3 => 2,
        4 => 3,
        _ => 4,
    }
}

fn clamp_params(tier: u8, p: &mut [f64], c_max: f64) {
    p[0] = p[0].clamp(A_MIN, A_MAX);
    p[1] = p[1].clamp(B_MIN, B_MAX);
    if tier >= 4 {
        p[2] = p[2].clamp(0.0, c_max);
    }
    if tier >= 5 {
        p[3] = p[3].clamp(D_MIN, D_MAX);
    }
}

/// Solves the k×k system M·x = rhs (k ≤ 4) in place by Gaussian elimination
/// with partial pivoting. Returns None when the pivot collapses.
fn solve_dense(m: &mut [[f64; 4]; 4], rhs: &mut [f64; 4], k: usize) -> Option<[f64; 4]> {
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("column range is non-empty");
        if m[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            for c in col..k {
                m[row][c] -= f * m[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..k).rev() {
        let mut acc = rhs[row];
        for c in row + 1..k {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// One damped Gauss–Newton descent from a given start; returns the best
/// parameters found, their SSR, and the iteration count. The SSR never
/// increases across accepted steps by construction.
fn lm_descent(tier: u8, points: &[ProfilePoint], start: &[f64], c_max: f64) -> (Vec<f64>, f64, u64) {
    let k = start.len();
    let mut params = start.to_vec();
    clamp_params(tier, &mut params, c_max);
    let mut current_ssr = ssr(&unpack(tier, &params), points);
    let mut mu = 1e-3;
    let mut iterations = 0u64;

    for _ in 0..200 {
        iterations += 1;
        // Residuals f and Jacobian J at the current parameters.
        let (a, b) = (params[0], params[1]);
        let c = if tier >= 4 { params[2] } else { 0.0 };
        let d = if tier >= 5 { params[3] } else { 1.0 };
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtf = [0.0f64; 4];
        for p in points {
            let rd = p.cpu_limit * d;
            let phi = rd.powf(-b);
            let f = a * phi + c - p.mean_runtime;
            let mut row = [0.0f64; 4];
            row[0] = phi;
            row[1] = -a * phi * rd.ln();
            if tier >= 4 {
                row[2] = 1.0;
            }
            if tier >= 5 {
                row[3] = -(a * b / d) * phi;
            }
            for i in 0..k {
                jtf[i] += row[i] * f;
                for j in 0..k {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }

        // Trial steps: damp until one lowers the SSR or damping saturates.
        loop {
            let mut m = jtj;
            for (i, mi) in m.iter_mut().enumerate().take(k) {
                mi[i] += mu * jtj[i][i].max(1e-12);
            }
            let mut rhs = [0.0f64; 4];
            for (slot, g) in rhs.iter_mut().zip(&jtf).take(k) {
                *slot = -g;
            }
            let step = solve_dense(&mut m, &mut rhs, k);
            let trial = step.map(|delta| {
                let mut trial = params.clone();
                for i in 0..k {
                    trial[i] += delta[i];
                }
                clamp_params(tier, &mut trial, c_max);
                (ssr(&unpack(tier, &trial), points), trial)
            });
            match trial {
                Some((new_ssr, trial)) if new_ssr.is_finite() && new_ssr < current_ssr => {
                    let improvement = current_ssr - new_ssr;
                    params = trial;
                    current_ssr = new_ssr;
                    mu = (mu / 10.0).max(1e-12);
                    if improvement <= 1e-10 * current_ssr.max(f64::MIN_POSITIVE) {
                        return (params, current_ssr, iterations);
                    }
                    break;
                }
                _ => {
                    mu *= 10.0;
                    if mu > 1e14 {
                        return (params, current_ssr, iterations);
                    }
                }
            }
        }
        if current_ssr == 0.0 {
            break;
        }
    }
    (params, current_ssr, iterations)
}

/// Closed-form best a (given b, c, d): minimize Σ((rᵢ − c) − a·φᵢ)² with
/// φᵢ = (Rᵢ·d)⁻ᵇ → a* = Σ(rᵢ − c)·φᵢ / Σφᵢ².
fn best_a_given(points: &[ProfilePoint], b: f64, c: f64, d: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for p in points {
        let phi = (p.cpu_limit * d).powf(-b);
        num += (p.mean_runtime - c) * phi;
        den += phi * phi;
    }
    (num / den).clamp(A_MIN, A_MAX)
}

fn fit_iterative(
    tier: u8,
    points: &[ProfilePoint],
    warm_start: Option<&RuntimeModel>,
) -> Result<FitOutcome, ModelError> {
    let min_r = points.iter().map(|p| p.mean_runtime).fold(f64::INFINITY, f64::min);
    let max_r = points.iter().map(|p| p.mean_runtime).fold(f64::NEG_INFINITY, f64::max);
    let min_limit = points.iter().map(|p| p.cpu_limit).fold(f64::INFINITY, f64::min);
    let k = active_count(tier);
    let c_max = min_r;

    let start = match warm_start {
        Some(w)
            if [w.a, w.b, w.c, w.d].iter().all(|v| v.is_finite())
                && w.validate().is_ok() =>
        {
            // Carry over what the warmer tier shares; newly activated
            // parameters begin neutral.
            let mut s = vec![w.a, w.b, 0.0, 1.0];
            if w.tier >= 4 {
                s[2] = w.c;
            }
            if w.tier >= 5 {
                s[3] = w.d;
            }
            s.truncate(k);
            s
        }
        _ => {
            // Cold start: pass through the slowest point with b = 1.
            let mut s = vec![max_r * min_limit, 1.0, 0.9 * min_r, 1.0];
            if tier == 3 {
                s[2] = 0.0;
            }
            s.truncate(k);
            s
        }
    };

    let (mut params, mut best_ssr, mut iterations) = lm_descent(tier, points, &start, c_max);

    // Deterministic multi-start rescue: only when the first descent leaves a
    // clearly imperfect fit (relative SSR above threshold), sweep shape/floor
    // seeds, descend from the three most promising, and keep the best.
    let scale: f64 = points.iter().map(|p| p.mean_runtime.powi(2)).sum();
    if !best_ssr.is_finite() || best_ssr > MULTISTART_TRIGGER * scale {
        const B_PALETTE: [f64; 10] = [0.2, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 3.0, 5.0, 8.0];
        const C_FRACTIONS: [f64; 4] = [0.0, 0.3, 0.6, 0.9];
        let c_seeds: &[f64] = if tier >= 4 { &C_FRACTIONS } else { &[0.0] };

        let mut seeds: Vec<(f64, Vec<f64>)> = Vec::new();
        for &b in &B_PALETTE {
            for &cf in c_seeds {
                let c = cf * min_r;
                let a = best_a_given(points, b, c, 1.0);
                let mut s = vec![a, b, c, 1.0];
                s.truncate(k);
                clamp_params(tier, &mut s, c_max);
                let s_ssr = ssr(&unpack(tier, &s), points);
                if s_ssr.is_finite() {
                    seeds.push((s_ssr, s));
                }
            }
        }
        seeds.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (_, seed) in seeds.into_iter().take(3) {
            let (p, s, it) = lm_descent(tier, points, &seed, c_max);
            iterations += it;
            if s.is_finite() && (s < best_ssr || !best_ssr.is_finite()) {
                best_ssr = s;
                params = p;
            }
        }
    }

    let model = unpack(tier, &params);
    if !best_ssr.is_finite() {
        return Err(ModelError::FitDiverged { last: model });
    }
    model.validate()?;
    Ok(FitOutcome { model, residual_norm: best_ssr.sqrt(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn demo_grid() -> LimitGrid {
        LimitGrid::new(0.1, 4.0, 0.1).unwrap()
    }

    #[test]
    fn tier_selection_caps_at_five() {
        let expect = [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 5), (12, 5), (100, 5)];
        for (n, tier) in expect {
            assert_eq!(select_tier(n).unwrap(), tier);
        }
    }

    #[test]
    fn tier_selection_rejects_empty() {
        assert!(matches!(select_tier(0), Err(ModelError::EmptyInput)));
    }

    #[test]
    fn eval_per_tier() {
        assert_eq!(RuntimeModel::tier1().eval(2.0).unwrap(), 0.5);
        assert_eq!(RuntimeModel::tier2(2.0).eval(4.0).unwrap(), 0.5);
        assert_relative_eq!(
            RuntimeModel::tier3(2.0, 0.5).eval(4.0).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            RuntimeModel::tier4(2.0, 0.5, 0.25).eval(4.0).unwrap(),
            1.25,
            max_relative = 1e-15
        );
        // Neutral tier 5 reduces exactly to R⁻¹.
        assert_relative_eq!(
            RuntimeModel::tier5(1.0, 1.0, 0.0, 1.0).eval(4.0).unwrap(),
            0.25,
            max_relative = 1e-15
        );
        // Frozen: 2·(1.0·1.5)^−0.8 + 0.05.
        assert_relative_eq!(
            RuntimeModel::tier5(2.0, 0.8, 0.05, 1.5).eval(1.0).unwrap(),
            1.495962361597,
            max_relative = 1e-12
        );
    }

    #[test]
    fn eval_rejects_bad_limits() {
        let m = RuntimeModel::tier1();
        assert!(matches!(m.eval(0.0), Err(ModelError::NonPositiveLimit(_))));
        assert!(matches!(m.eval(-1.0), Err(ModelError::NonPositiveLimit(_))));
        assert!(matches!(m.eval(f64::NAN), Err(ModelError::NonPositiveLimit(_))));
    }

    #[test]
    fn constructors_neutralize_inactive_parameters() {
        let m = RuntimeModel::tier3(2.0, 0.5);
        assert_eq!((m.c, m.d), (0.0, 1.0));
        let m = RuntimeModel::tier1();
        assert_eq!((m.a, m.b, m.c, m.d), (1.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn serde_shape_is_flat_and_lossless() {
        let m = RuntimeModel::tier5(2.0, 0.8, 0.05, 1.5);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"tier":5,"a":2.0,"b":0.8,"c":0.05,"d":1.5}"#);
        let back: RuntimeModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        // 17-significant-digit parameters survive the round trip bit-exactly.
        let awkward = RuntimeModel::tier5(
            2.000000000000000444,
            0.123456789012345678,
            0.05000000000000001,
            1.4999999999999998,
        );
        let back: RuntimeModel = serde_json::from_str(&serde_json::to_string(&awkward).unwrap())
            .unwrap();
        assert_eq!(back, awkward);
    }

    #[test]
    fn validate_catches_broken_models() {
        let mut m = RuntimeModel::tier3(2.0, 0.5);
        assert!(m.validate().is_ok());
        m.c = 0.1; // inactive at tier 3
        assert!(m.validate().is_err());
        let bad = RuntimeModel { tier: 7, a: 1.0, b: 1.0, c: 0.0, d: 1.0 };
        assert!(bad.validate().is_err());
        let bad = RuntimeModel { tier: 3, a: -1.0, b: 1.0, c: 0.0, d: 1.0 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn invert_closed_forms() {
        assert_eq!(RuntimeModel::tier1().invert_unclamped(0.5).unwrap(), 2.0);
        assert_eq!(RuntimeModel::tier2(2.0).invert_unclamped(0.5).unwrap(), 4.0);
        assert_relative_eq!(
            RuntimeModel::tier3(2.0, 0.5).invert_unclamped(1.0).unwrap(),
            4.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            RuntimeModel::tier4(2.0, 0.5, 0.25).invert_unclamped(1.25).unwrap(),
            4.0,
            max_relative = 1e-12
        );
        // Frozen: ((1.4937 − 0.05)/2)^(−1/0.8) / 1.5.
        assert_relative_eq!(
            RuntimeModel::tier5(2.0, 0.8, 0.05, 1.5).invert_unclamped(1.4937).unwrap(),
            1.0019592060157148,
            max_relative = 1e-12
        );
    }

    #[test]
    fn invert_snaps_onto_the_grid() {
        let grid = demo_grid();
        let m = RuntimeModel::tier5(2.0, 0.8, 0.05, 1.5);
        let inv = m.invert(1.4937, &grid).unwrap();
        assert_eq!(inv.limit, 1.0);
        assert!(!inv.target_unreachable);
    }

    #[test]
    fn invert_clamps_to_grid_range() {
        let grid = demo_grid();
        // Raw inverse far above l_max.
        let m = RuntimeModel::tier2(100.0);
        let inv = m.invert(0.5, &grid).unwrap();
        assert_eq!(inv.limit, 4.0);
        assert!(!inv.target_unreachable);
        // Raw inverse below l_min.
        let inv = m.invert(1.0e4, &grid).unwrap();
        assert_eq!(inv.limit, 0.1);
    }

    #[test]
    fn unreachable_target_saturates_with_flag() {
        let grid = demo_grid();
        let m = RuntimeModel::tier4(1.0, 1.0, 0.2);
        assert!(matches!(
            m.invert_unclamped(0.1),
            Err(ModelError::TargetUnreachable { .. })
        ));
        let inv = m.invert(0.1, &grid).unwrap();
        assert_eq!(inv.limit, 4.0);
        assert!(inv.target_unreachable);
        // Exactly at the floor is also unreachable.
        assert!(m.invert(0.2, &grid).unwrap().target_unreachable);
    }

    #[test]
    fn eval_invert_round_trip() {
        let models = [
            RuntimeModel::tier1(),
            RuntimeModel::tier2(3.0),
            RuntimeModel::tier3(2.0, 0.7),
            RuntimeModel::tier4(2.0, 0.7, 0.1),
            RuntimeModel::tier5(2.0, 0.8, 0.05, 1.5),
        ];
        for m in models {
            for limit in [0.2, 0.5, 1.0, 2.5, 4.0] {
                let t = m.eval(limit).unwrap();
                let back = m.invert_unclamped(t).unwrap();
                assert_relative_eq!(back, limit, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn profile_point_aggregation() {
        let p = ProfilePoint::new(2.0, &[1.0, 2.0, 3.0], 0.95).unwrap();
        assert_eq!(p.mean_runtime, 2.0);
        assert_eq!(p.n_samples, 3);
        assert_relative_eq!(p.sample_variance, 1.0, max_relative = 1e-15);
        // Two-sided 95% t interval: 2·t(0.975, df=2)·√(1/3).
        assert_relative_eq!(p.ci_width, 2.0 * 4.302653 * (1.0f64 / 3.0).sqrt(), max_relative = 1e-6);
        assert!(ProfilePoint::new(2.0, &[1.0], 0.95).is_err());
        assert!(ProfilePoint::new(0.0, &[1.0, 2.0], 0.95).is_err());
        assert!(ProfilePoint::summary(1.0, -2.0).is_err());
    }

    fn truth_points(m: &RuntimeModel, limits: &[f64]) -> Vec<ProfilePoint> {
        limits
            .iter()
            .map(|&l| ProfilePoint::summary(l, m.eval(l).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn fit_tier1_is_parameterless() {
        let pts = [ProfilePoint::summary(1.0, 1.0).unwrap()];
        let out = fit(&pts, None).unwrap();
        assert_eq!(out.model, RuntimeModel::tier1());
        assert_eq!(out.model.eval(1.0).unwrap(), 1.0);
        assert!(out.residual_norm < 1e-15);
    }

    #[test]
    fn fit_tier2_closed_form_exact() {
        // (1, 2), (2, 1): a = (2/1 + 1/2)/(1 + 1/4) = 2.0 by hand.
        let pts = truth_points(&RuntimeModel::tier2(2.0), &[1.0, 2.0]);
        let out = fit(&pts, None).unwrap();
        assert_eq!(out.model.tier, 2);
        assert_relative_eq!(out.model.a, 2.0, max_relative = 1e-12);
        assert!(out.residual_norm < 1e-12);
    }

    #[test]
    fn fit_tier3_recovers_exact_data() {
        let truth = RuntimeModel::tier3(2.0, 0.5);
        let pts = truth_points(&truth, &[1.0, 2.0, 4.0]);
        let out = fit(&pts, None).unwrap();
        assert_eq!(out.model.tier, 3);
        assert_relative_eq!(out.model.a, 2.0, max_relative = 1e-6);
        assert_relative_eq!(out.model.b, 0.5, max_relative = 1e-6);
        assert!(out.residual_norm < 1e-7);
    }

    #[test]
    fn fit_tier4_recovers_exact_data() {
        let truth = RuntimeModel::tier4(2.0, 0.8, 0.3);
        let pts = truth_points(&truth, &[0.5, 1.0, 2.0, 4.0]);
        let out = fit(&pts, None).unwrap();
        assert_eq!(out.model.tier, 4);
        for limit in [0.3, 0.7, 1.5, 3.0] {
            assert_relative_eq!(
                out.model.eval(limit).unwrap(),
                truth.eval(limit).unwrap(),
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn fit_six_point_curve_within_a_part_in_ten_thousand() {
        let truth = RuntimeModel::tier5(3.0, 0.9, 0.1, 1.0);
        let limits = [0.2, 0.5, 1.0, 2.0, 4.0, 8.0];
        let out = fit(&truth_points(&truth, &limits), None).unwrap();
        assert_eq!(out.model.tier, 5);
        for &limit in &limits {
            assert_relative_eq!(
                out.model.eval(limit).unwrap(),
                truth.eval(limit).unwrap(),
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn fit_tier5_matches_predictions_despite_a_d_coupling() {
        let truth = RuntimeModel::tier5(2.0, 0.8, 0.05, 1.5);
        let pts = truth_points(&truth, &[0.2, 0.5, 1.0, 2.0, 4.0]);
        let out = fit(&pts, None).unwrap();
        assert_eq!(out.model.tier, 5);
        // a and d individually are not identifiable ((R·d)⁻ᵇ = d⁻ᵇ·R⁻ᵇ), so
        // the contract is on predictions across the profiled range.
        for limit in [0.2, 0.3, 0.8, 1.7, 3.9] {
            assert_relative_eq!(
                out.model.eval(limit).unwrap(),
                truth.eval(limit).unwrap(),
                max_relative = 1e-3
            );
        }
    }

    #[test]
    fn warm_start_converges_from_previous_tier() {
        let truth = RuntimeModel::tier4(2.0, 0.8, 0.3);
        let warm = fit(&truth_points(&truth, &[0.5, 1.0, 4.0]), None).unwrap();
        let pts = truth_points(&truth, &[0.5, 1.0, 2.0, 4.0]);
        let out = fit(&pts, Some(&warm.model)).unwrap();
        assert_eq!(out.model.tier, 4);
        for limit in [0.5, 1.0, 2.0, 4.0] {
            assert_relative_eq!(
                out.model.eval(limit).unwrap(),
                truth.eval(limit).unwrap(),
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn residual_norm_bounds_every_pointwise_residual() {
        let truth = RuntimeModel::tier4(2.0, 0.8, 0.3);
        let mut pts = truth_points(&truth, &[0.5, 1.0, 2.0, 4.0]);
        for (i, p) in pts.iter_mut().enumerate() {
            p.mean_runtime *= 1.0 + 0.02 * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let out = fit(&pts, None).unwrap();
        for p in &pts {
            let residual = (out.model.eval(p.cpu_limit).unwrap() - p.mean_runtime).abs();
            assert!(residual <= out.residual_norm + 1e-12);
        }
    }

    #[test]
    fn fit_respects_parameter_bounds() {
        // Runtimes that would pull b negative (runtime grows with limit):
        // the box keeps b at its lower bound rather than flipping the shape.
        let pts = [
            ProfilePoint::summary(1.0, 1.0).unwrap(),
            ProfilePoint::summary(2.0, 2.0).unwrap(),
            ProfilePoint::summary(4.0, 4.0).unwrap(),
        ];
        let out = fit(&pts, None).unwrap();
        assert!(out.model.b >= B_MIN);
        assert!(out.model.a <= A_MAX);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        assert!(matches!(fit(&[], None), Err(ModelError::EmptyInput)));
        let bad = [ProfilePoint {
            cpu_limit: 1.0,
            mean_runtime: -1.0,
            n_samples: 1,
            sample_variance: 0.0,
            ci_width: 0.0,
        }];
        assert!(fit(&bad, None).is_err());
        let dup = [
            ProfilePoint::summary(1.0, 2.0).unwrap(),
            ProfilePoint::summary(2.0, 1.0).unwrap(),
            ProfilePoint::summary(1.0, 2.1).unwrap(),
        ];
        assert!(matches!(fit(&dup, None), Err(ModelError::DuplicateLimit(_))));
    }

    #[test]
    fn fit_handles_noisy_floor_data_via_multistart() {
        // Strong floor + shallow slope: an awkward landscape for the naive
        // cold start; the seed sweep must still land near the truth.
        let truth = RuntimeModel::tier4(0.4, 1.6, 0.9);
        let mut pts = truth_points(&truth, &[0.3, 0.9, 1.8, 3.6]);
        for (i, p) in pts.iter_mut().enumerate() {
            p.mean_runtime *= 1.0 + 1e-3 * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let out = fit(&pts, None).unwrap();
        for limit in [0.3, 0.9, 1.8, 3.6] {
            assert_relative_eq!(
                out.model.eval(limit).unwrap(),
                truth.eval(limit).unwrap(),
                max_relative = 2e-2
            );
        }
    }
}
