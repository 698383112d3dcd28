//! Probe selection: the CPU-limit grid, the synthetic-target anchor, the
//! parallel initial probe set, and the four next-probe strategies.
//!
//! Limits live on a uniform grid {l_min, l_min+δ, …, l_max}. A profiling
//! session starts with a small batch of probes chosen so they can run *in
//! parallel* on a single l_max-core budget:
//!
//! ```text
//! anchor            l_p  = snap(max(0.2, l_max·p))
//! n = 2             {l_p, l_max − l_p}
//! n = 3, l_max > 1  {l_p, l_m = snap((l_min+l_max)/2), l_max − l_m − l_p}
//! n = 3, l_max ≤ 1  {l_p, l_q = snap((l_p+l_max)/4), l_max/2}
//! n = 4             {l_p, l_q, l_qm = snap((l_p+l_q)/2), l_max − l_qm − l_q − l_p}
//! ```
//!
//! Every element is snapped to the grid the moment it is computed and later
//! formulas use the *final* (snapped, deduplicated) values, so the set always
//! consists of distinct grid points whose sum stays within the l_max core
//! budget — or the whole selection is reported infeasible.
//!
//! After the initial batch, one of four strategies proposes each further
//! probe: inverting the current model fit (NMS), bisection on the grid,
//! Bayesian optimization with a Gaussian-process surrogate, or uniform random
//! choice among unprofiled limits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{fit, ModelError, ProfilePoint, RuntimeModel};

pub mod bayesopt;

/// Errors from grid construction and probe selection.
#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid limit grid: {0}")]
    InvalidGrid(String),
    #[error("anchor fraction must lie strictly inside (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("initial probe count must be 2, 3, or 4, got {0}")]
    InvalidCount(usize),
    #[error("no feasible initial probe set: {0}")]
    Infeasible(String),
    #[error("limit {0} is not on the profiling grid")]
    OffGrid(f64),
    #[error("no unprofiled grid limit remains to propose (or the search bracket is empty)")]
    Exhausted,
    #[error("strategy needs at least one observation before proposing a probe")]
    NoObservations,
    #[error("limit {0} was already observed; strategies never probe a grid point twice")]
    DuplicateObservation(f64),
    #[error("anchor probe aggregates {got} samples but the stopping rule demands at least {need}")]
    InsufficientSamples { got: u64, need: u64 },
    #[error("unknown strategy name {0:?} (expected nms, binary_search, bayes_opt, or random)")]
    UnknownStrategy(String),
    #[error("numerical failure in the surrogate model: {0}")]
    Numerical(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ─── The limit grid ───

/// Uniform grid of admissible CPU limits: l_min, l_min+δ, …, l_max.
///
/// The span must be an exact multiple of δ (within 1e−9) and contain at least
/// two points. Grid values are kept decimal-clean (rounded to 9 places) so a
/// grid like 0.1..4.0 step 0.1 really contains 0.3, not 0.30000000000000004.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitGrid {
    l_min: f64,
    l_max: f64,
    delta: f64,
}

impl LimitGrid {
    pub fn new(l_min: f64, l_max: f64, delta: f64) -> Result<Self, SelectionError> {
        for (name, v) in [("l_min", l_min), ("l_max", l_max), ("delta", delta)] {
            if !v.is_finite() {
                return Err(SelectionError::InvalidGrid(format!("{name} must be finite, got {v}")));
            }
        }
        if l_min <= 0.0 {
            return Err(SelectionError::InvalidGrid(format!(
                "l_min must be positive, got {l_min}"
            )));
        }
        if delta <= 0.0 {
            return Err(SelectionError::InvalidGrid(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if l_max <= l_min {
            return Err(SelectionError::InvalidGrid(format!(
                "l_max ({l_max}) must exceed l_min ({l_min}); the grid needs at least two points"
            )));
        }
        if l_min < delta - 1e-12 {
            return Err(SelectionError::InvalidGrid(format!(
                "l_min ({l_min}) must be at least delta ({delta}) so the grid stays positive \
                 one step below its minimum"
            )));
        }
        let steps = (l_max - l_min) / delta;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(SelectionError::InvalidGrid(format!(
                "the span l_max − l_min = {} is not a whole multiple of delta = {delta}",
                l_max - l_min
            )));
        }
        Ok(Self { l_min, l_max, delta })
    }

    pub fn l_min(&self) -> f64 {
        self.l_min
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        ((self.l_max - self.l_min) / self.delta).round() as usize + 1
    }

    /// Grids always hold ≥ 2 points; kept for idiomatic len/is_empty pairing.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `index`-th limit, decimal-cleaned. Panics if out of range.
    pub fn limit_at(&self, index: usize) -> f64 {
        assert!(index < self.len(), "grid index {index} out of range (len {})", self.len());
        let raw = self.l_min + index as f64 * self.delta;
        (raw * 1e9).round() / 1e9
    }

    /// All grid limits in ascending order.
    pub fn limits(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.limit_at(i)).collect()
    }

    /// Index of a value that already lies on the grid (within 1e−9).
    pub fn index_of(&self, value: f64) -> Option<usize> {
        if !value.is_finite() {
            return None;
        }
        let idx = ((value - self.l_min) / self.delta).round();
        if idx < 0.0 || idx >= self.len() as f64 {
            return None;
        }
        let idx = idx as usize;
        ((self.limit_at(idx) - value).abs() <= 1e-9).then_some(idx)
    }

    /// Clamps into range and snaps to the nearest grid point; exact midpoints
    /// round up (with a 1e−9 guard against float representation error).
    pub fn snap(&self, value: f64) -> f64 {
        let v = value.clamp(self.l_min, self.l_max);
        let frac = (v - self.l_min) / self.delta;
        let mut idx = frac.floor();
        if frac - idx >= 0.5 - 1e-9 {
            idx += 1.0;
        }
        self.limit_at((idx as usize).min(self.len() - 1))
    }

    /// Like [`snap`](Self::snap), but a value farther than δ/2 outside the
    /// grid range is an error instead of being silently clamped.
    pub fn snap_checked(&self, value: f64) -> Result<f64, SelectionError> {
        if !value.is_finite()
            || value < self.l_min - self.delta / 2.0 - 1e-9
            || value > self.l_max + self.delta / 2.0 + 1e-9
        {
            return Err(SelectionError::Infeasible(format!(
                "computed limit {value} falls outside the grid [{}, {}]",
                self.l_min, self.l_max
            )));
        }
        Ok(self.snap(value))
    }
}

// ─── Warnings ───

/// Non-fatal conditions detected while selecting probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SelectionWarning {
    /// The target anchor sits on the grid minimum, so the synthetic target
    /// equals the slowest measurable runtime.
    AnchorAtGridMinimum { limit: f64 },
    /// An initial probe collided with an earlier one and was moved up one
    /// grid step.
    DuplicatePerturbed { from: f64, to: f64 },
    /// The anchor fraction is outside the conventional profiling set
    /// {0.025, 0.05, 0.075, 0.1, 0.125, 0.15}; allowed, but results are not
    /// comparable to the usual presets.
    NonStandardFraction { fraction: f64 },
}

impl fmt::Display for SelectionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AnchorAtGridMinimum { limit } => write!(
                f,
                "target anchor {limit} sits at the grid minimum; the synthetic target \
                 equals the slowest measurable runtime"
            ),
            Self::DuplicatePerturbed { from, to } => {
                write!(f, "initial probe {from} duplicated an earlier one; moved to {to}")
            }
            Self::NonStandardFraction { fraction } => {
                write!(f, "anchor fraction {fraction} is outside the standard presets")
            }
        }
    }
}

// ─── Synthetic target anchor ───

/// Anchor fractions considered standard presets; anything else is allowed
/// but flagged with [`SelectionWarning::NonStandardFraction`].
pub const STANDARD_FRACTIONS: [f64; 6] = [0.025, 0.05, 0.075, 0.1, 0.125, 0.15];

/// Anchor limit l_p = snap(max(0.2, l_max·fraction)).
///
/// Small fractions of small grids would otherwise anchor below any
/// practically schedulable limit, hence the 0.2-core floor.
pub fn anchor_limit(grid: &LimitGrid, fraction: f64) -> Result<f64, SelectionError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SelectionError::InvalidFraction(fraction));
    }
    Ok(grid.snap(f64::max(0.2, grid.l_max() * fraction)))
}

/// The session's synthetic runtime target, extracted from the anchor probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTarget {
    /// Per-sample runtime target: the anchor's measured mean.
    pub target_runtime: f64,
    /// Set when the anchor limit degenerated onto the grid minimum.
    pub warning: Option<SelectionWarning>,
}

/// Turns the anchor probe's measurement into the synthetic runtime target.
///
/// The target is simply the anchor's mean per-sample runtime — the job's own
/// behavior at a deliberately scarce limit defines "slow enough to matter".
/// The anchor must lie on the grid and must aggregate at least the stopping
/// rule's minimum sample count, otherwise the target would be noise.
pub fn synthetic_target(
    anchor: &ProfilePoint,
    grid: &LimitGrid,
    min_samples: u64,
) -> Result<SyntheticTarget, SelectionError> {
    if grid.index_of(anchor.cpu_limit).is_none() {
        return Err(SelectionError::OffGrid(anchor.cpu_limit));
    }
    if anchor.n_samples < min_samples {
        return Err(SelectionError::InsufficientSamples {
            got: anchor.n_samples,
            need: min_samples,
        });
    }
    let warning = ((anchor.cpu_limit - grid.l_min()).abs() <= 1e-9)
        .then_some(SelectionWarning::AnchorAtGridMinimum { limit: anchor.cpu_limit });
    Ok(SyntheticTarget { target_runtime: anchor.mean_runtime, warning })
}

// ─── Initial probe sets ───

/// The initial parallel probe batch plus any warnings raised selecting it.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSelection {
    /// Distinct grid limits, in selection order (the anchor comes first);
    /// their sum never exceeds l_max, so all can run concurrently.
    pub limits: Vec<f64>,
    pub warnings: Vec<SelectionWarning>,
}

/// Chooses `n_initial` (2–4) distinct grid limits that fit one l_max-core
/// budget, anchored at the synthetic-target limit.
///
/// Elements are snapped as they are computed; a collision is moved up one
/// grid step exactly once. The result must end up distinct with sum ≤ l_max,
/// otherwise the configuration is infeasible.
pub fn initial_limits(
    grid: &LimitGrid,
    n_initial: usize,
    fraction: f64,
) -> Result<InitialSelection, SelectionError> {
    if !(2..=4).contains(&n_initial) {
        return Err(SelectionError::InvalidCount(n_initial));
    }
    let (l_min, l_max, delta) = (grid.l_min(), grid.l_max(), grid.delta());

    // The cheapest n distinct grid values sum to n·l_min + δ·n(n−1)/2; if
    // even that overshoots the core budget, no set can exist.
    let n = n_initial as f64;
    let floor_sum = n * l_min + delta * n * (n - 1.0) / 2.0;
    if floor_sum > l_max + 1e-9 {
        return Err(SelectionError::Infeasible(format!(
            "{n_initial} distinct limits need at least {floor_sum} cores in total, \
             but the budget is l_max = {l_max}"
        )));
    }

    let anchor = anchor_limit(grid, fraction)?;
    let mut warnings: Vec<SelectionWarning> = Vec::new();
    if !STANDARD_FRACTIONS.iter().any(|&p| (p - fraction).abs() <= 1e-12) {
        warnings.push(SelectionWarning::NonStandardFraction { fraction });
    }
    let mut limits: Vec<f64> = Vec::with_capacity(n_initial);

    let push = |raw: f64, limits: &mut Vec<f64>, warnings: &mut Vec<SelectionWarning>| {
        let snapped = grid.snap_checked(raw)?;
        let taken = |v: f64, l: &[f64]| l.iter().any(|&x| (x - v).abs() <= 1e-9);
        let mut value = snapped;
        if taken(value, limits) {
            let idx = grid.index_of(value).expect("snapped values lie on the grid");
            if idx + 1 >= grid.len() {
                return Err(SelectionError::Infeasible(format!(
                    "initial probe {value} duplicates an earlier one at the top of the grid"
                )));
            }
            let bumped = grid.limit_at(idx + 1);
            if taken(bumped, limits) {
                return Err(SelectionError::Infeasible(format!(
                    "initial probe {value} still duplicates an earlier one after moving \
                     one step up"
                )));
            }
            warnings.push(SelectionWarning::DuplicatePerturbed { from: value, to: bumped });
            value = bumped;
        }
        limits.push(value);
        Ok(value)
    };

    let l_p = push(anchor, &mut limits, &mut warnings)?;
    match n_initial {
        2 => {
            push(l_max - l_p, &mut limits, &mut warnings)?;
        }
        3 if l_max > 1.0 => {
            let l_m = push((l_min + l_max) / 2.0, &mut limits, &mut warnings)?;
            push(l_max - l_m - l_p, &mut limits, &mut warnings)?;
        }
        3 => {
            push((l_p + l_max) / 4.0, &mut limits, &mut warnings)?;
            push(l_max / 2.0, &mut limits, &mut warnings)?;
        }
        _ => {
            let l_q = push((l_p + l_max) / 4.0, &mut limits, &mut warnings)?;
            let l_qm = push((l_p + l_q) / 2.0, &mut limits, &mut warnings)?;
            push(l_max - l_qm - l_q - l_p, &mut limits, &mut warnings)?;
        }
    }

    debug_assert_eq!(limits.len(), n_initial);
    let sum: f64 = limits.iter().sum();
    if sum > l_max + 1e-9 {
        return Err(SelectionError::Infeasible(format!(
            "initial probes {limits:?} sum to {sum}, exceeding the core budget l_max = {l_max}"
        )));
    }
    Ok(InitialSelection { limits, warnings })
}

// ─── Strategies ───

/// Which rule proposes each probe after the initial batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Fit the current model, invert it at the target, probe the nearest
    /// unprofiled grid limit.
    Nms,
    /// Bisect the grid on "runtime above/below target" at the bracket middle.
    BinarySearch,
    /// Gaussian-process surrogate over a target-closeness score, maximizing
    /// expected improvement.
    BayesOpt,
    /// Uniform random choice among unprofiled limits (baseline).
    Random,
}

impl StrategyKind {
    /// All strategies, in canonical comparison order.
    pub const ALL: [StrategyKind; 4] =
        [Self::Nms, Self::BinarySearch, Self::BayesOpt, Self::Random];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Nms => "nms",
            Self::BinarySearch => "binary_search",
            Self::BayesOpt => "bayes_opt",
            Self::Random => "random",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nms" => Ok(Self::Nms),
            "binary_search" | "binary-search" => Ok(Self::BinarySearch),
            "bayes_opt" | "bayes-opt" => Ok(Self::BayesOpt),
            "random" => Ok(Self::Random),
            other => Err(SelectionError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Sequential next-probe selector: feed it every observation, ask it for the
/// next limit to probe.
///
/// The state tracks which grid limits have been probed so no strategy ever
/// proposes a repeat. `next_limit` is idempotent between observations —
/// calling it twice without an intervening `observe` proposes the same limit
/// (the random strategy derives its generator from the observation count for
/// exactly this reason).
#[derive(Debug, Clone)]
pub struct StrategyState {
    kind: StrategyKind,
    grid: LimitGrid,
    target_runtime: f64,
    seed: u64,
    observed: Vec<ProfilePoint>,
    profiled: Vec<bool>,
    runtimes: Vec<Option<f64>>,
    nms_model: Option<RuntimeModel>,
    bs_lo: i64,
    bs_hi: i64,
}

impl StrategyState {
    pub fn new(
        kind: StrategyKind,
        grid: LimitGrid,
        target_runtime: f64,
        seed: u64,
    ) -> Result<Self, SelectionError> {
        if !(target_runtime > 0.0 && target_runtime.is_finite()) {
            return Err(ModelError::NonPositiveTarget(target_runtime).into());
        }
        let len = grid.len();
        Ok(Self {
            kind,
            grid,
            target_runtime,
            seed,
            observed: Vec::new(),
            profiled: vec![false; len],
            runtimes: vec![None; len],
            nms_model: None,
            bs_lo: 0,
            bs_hi: len as i64 - 1,
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn target_runtime(&self) -> f64 {
        self.target_runtime
    }

    /// Observations fed so far, in arrival order.
    pub fn observed(&self) -> &[ProfilePoint] {
        self.observed.as_slice()
    }

    /// The model the NMS strategy fitted on its most recent proposal, if any.
    pub fn last_model(&self) -> Option<&RuntimeModel> {
        self.nms_model.as_ref()
    }

    /// Records a probe result. The limit must lie on the grid and must not
    /// have been observed before.
    pub fn observe(&mut self, point: ProfilePoint) -> Result<(), SelectionError> {
        let idx = self
            .grid
            .index_of(point.cpu_limit)
            .ok_or(SelectionError::OffGrid(point.cpu_limit))?;
        if self.profiled[idx] {
            return Err(SelectionError::DuplicateObservation(point.cpu_limit));
        }
        self.profiled[idx] = true;
        self.runtimes[idx] = Some(point.mean_runtime);
        self.observed.push(point);
        Ok(())
    }

    /// Proposes the next grid limit to probe.
    pub fn next_limit(&mut self) -> Result<f64, SelectionError> {
        if self.profiled.iter().all(|&p| p) {
            return Err(SelectionError::Exhausted);
        }
        match self.kind {
            StrategyKind::Nms => self.next_nms(),
            StrategyKind::BinarySearch => self.next_binary_search(),
            StrategyKind::BayesOpt => {
                if self.observed.is_empty() {
                    return Err(SelectionError::NoObservations);
                }
                bayesopt::propose(&self.grid, &self.observed, self.target_runtime, &self.profiled)
            }
            StrategyKind::Random => self.next_random(),
        }
    }

    fn next_nms(&mut self) -> Result<f64, SelectionError> {
        if self.observed.is_empty() {
            return Err(SelectionError::NoObservations);
        }
        // Refit on everything seen so far, warm-started from the last fit so
        // the parameter trajectory stays continuous from step to step.
        let outcome = fit(&self.observed, self.nms_model.as_ref())?;
        self.nms_model = Some(outcome.model);
        let inversion = outcome.model.invert(self.target_runtime, &self.grid)?;
        let idx = self
            .grid
            .index_of(inversion.limit)
            .expect("inversion snaps onto the grid");
        let chosen = self.nearest_unprofiled(idx).ok_or(SelectionError::Exhausted)?;
        Ok(self.grid.limit_at(chosen))
    }

    /// Nearest unprofiled index to `idx`, preferring the smaller side on
    /// ties so repeated inversions drift toward cheaper limits.
    fn nearest_unprofiled(&self, idx: usize) -> Option<usize> {
        if !self.profiled[idx] {
            return Some(idx);
        }
        for dist in 1..self.profiled.len() {
            if idx >= dist && !self.profiled[idx - dist] {
                return Some(idx - dist);
            }
            let up = idx + dist;
            if up < self.profiled.len() && !self.profiled[up] {
                return Some(up);
            }
        }
        None
    }

    fn next_binary_search(&mut self) -> Result<f64, SelectionError> {
        // Inclusive index bracket [lo, hi]. A runtime above target means the
        // job needs more CPU (search up); at or below target means the limit
        // suffices (search down for a cheaper one). Mids probed earlier —
        // including the initial batch — halve immediately from their
        // recorded runtimes without spending a probe.
        loop {
            if self.bs_lo > self.bs_hi {
                return Err(SelectionError::Exhausted);
            }
            let mid = (self.bs_lo + (self.bs_hi - self.bs_lo) / 2) as usize;
            if !self.profiled[mid] {
                return Ok(self.grid.limit_at(mid));
            }
            let runtime = self.runtimes[mid].expect("profiled index has a recorded runtime");
            if runtime > self.target_runtime {
                self.bs_lo = mid as i64 + 1;
            } else {
                self.bs_hi = mid as i64 - 1;
            }
        }
    }

    fn next_random(&mut self) -> Result<f64, SelectionError> {
        // Seeded from (session seed, #observations) so a repeated call
        // without new data proposes the same limit, yet each step redraws.
        let seed = crate::derive_seed(self.seed, &[self.observed.len() as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unprofiled: Vec<usize> =
            (0..self.profiled.len()).filter(|&i| !self.profiled[i]).collect();
        let pick = unprofiled[rng.random_range(0..unprofiled.len())];
        Ok(self.grid.limit_at(pick))
    }
}
