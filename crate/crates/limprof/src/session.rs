//! Profiling sessions and strategy benchmarks.
//!
//! [`run_session`] drives one complete profiling run against a job oracle:
//!
//! ```text
//! 1. probe the initial batch (2–4 limits that fit one l_max-core budget);
//!    charge max(durations) when the oracle supports parallel probes,
//!    Σ durations when it does not
//! 2. take the anchor probe's mean runtime as the synthetic target
//! 3. refit the tiered model after every probe; invert it at the target
//! 4. let the configured strategy propose each further probe, one at a
//!    time, until max_steps total probes (or the strategy is exhausted)
//! ```
//!
//! The report keeps the whole audit trail: every probe, every intermediate
//! model with its (optional) SMAPE against a reference curve, cumulative
//! profiling cost at each step, and the final recommendation.
//!
//! [`run_benchmark`] crosses configurations × strategies × seeded
//! repetitions, reusing one oracle seed per (config, repetition) cell so
//! every strategy faces byte-identical noise, and tallies per-step wins at
//! strict and 10%-tolerant thresholds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{count_wins, smape, MetricError, SmapeConfig};
use crate::model::{fit, ModelError, ProfilePoint, RuntimeModel};
use crate::oracle::{JobOracle, OracleError};
use crate::selection::{
    initial_limits, synthetic_target, LimitGrid, SelectionError, StrategyKind, StrategyState,
};
use crate::stopping::{StoppingError, StoppingRule};

/// Errors from running sessions or benchmarks.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "oracle grid [{oracle_min}, {oracle_max}] step {oracle_delta} does not match the \
         configured grid [{config_min}, {config_max}] step {config_delta}"
    )]
    GridMismatch {
        oracle_min: f64,
        oracle_max: f64,
        oracle_delta: f64,
        config_min: f64,
        config_max: f64,
        config_delta: f64,
    },
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stopping(#[from] StoppingError),
}

// ─── Configuration ───

/// Everything a profiling session needs, JSON-friendly.
///
/// `max_steps` counts *total* probes including the initial batch, so a
/// session with `n_initial = 3, max_steps = 8` spends five sequential
/// strategy probes after the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfilingConfig {
    pub l_min: f64,
    pub l_max: f64,
    pub delta: f64,
    /// Anchor fraction p: the target anchor sits at snap(max(0.2, l_max·p)).
    pub anchor_fraction: f64,
    /// Size of the parallel initial batch (2–4).
    pub n_initial: usize,
    /// Total probe budget, including the initial batch.
    pub max_steps: usize,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub stopping: StoppingRule,
}

impl Default for ProfilingConfig {
    fn default() -> Self {
        Self {
            l_min: 0.1,
            l_max: 4.0,
            delta: 0.1,
            anchor_fraction: 0.05,
            n_initial: 3,
            max_steps: 8,
            strategy: StrategyKind::Nms,
            seed: 0,
            stopping: StoppingRule::default(),
        }
    }
}

impl ProfilingConfig {
    /// The limit grid this config describes.
    pub fn grid(&self) -> Result<LimitGrid, SelectionError> {
        LimitGrid::new(self.l_min, self.l_max, self.delta)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        self.grid()?;
        if !(self.anchor_fraction > 0.0 && self.anchor_fraction < 1.0) {
            return Err(SessionError::InvalidConfig(format!(
                "anchor_fraction must lie strictly inside (0, 1), got {}",
                self.anchor_fraction
            )));
        }
        if !(2..=4).contains(&self.n_initial) {
            return Err(SessionError::InvalidConfig(format!(
                "n_initial must be 2, 3, or 4, got {}",
                self.n_initial
            )));
        }
        if self.max_steps < self.n_initial {
            return Err(SessionError::InvalidConfig(format!(
                "max_steps ({}) counts total probes and cannot be smaller than n_initial ({})",
                self.max_steps, self.n_initial
            )));
        }
        self.stopping
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

// ─── Session report ───

/// One probe as it happened, in session order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    /// 1-based position in the probe sequence.
    pub step: usize,
    pub cpu_limit: f64,
    pub mean_runtime: f64,
    pub n_samples: u64,
    pub sample_variance: f64,
    pub ci_width: f64,
    pub duration_seconds: f64,
    /// True for members of the parallel initial batch.
    pub initial: bool,
}

/// The model state after `step` total probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepModel {
    /// Number of probes the fit used (n_initial, n_initial+1, …).
    pub step: usize,
    pub model: RuntimeModel,
    pub residual_norm: f64,
    /// SMAPE of the model's grid predictions against the reference curve;
    /// absent when the session ran without a reference.
    pub smape_vs_reference: Option<f64>,
    /// Profiling cost accumulated up to and including this step.
    pub cumulative_time_seconds: f64,
    /// Smallest grid limit this model predicts to meet the target.
    pub recommended_limit: f64,
    pub target_unreachable: bool,
}

/// Full audit trail of one profiling session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub strategy: StrategyKind,
    /// The anchor limit whose measurement defined the target.
    pub target_limit: f64,
    /// Per-sample runtime target (the anchor probe's mean).
    pub target_runtime: f64,
    pub probes: Vec<ProbeRecord>,
    pub models: Vec<StepModel>,
    pub total_time_seconds: f64,
    /// Final recommendation (from the last fitted model).
    pub recommended_limit: f64,
    pub target_unreachable: bool,
    pub warnings: Vec<String>,
}

fn grids_match(a: &LimitGrid, b: &LimitGrid) -> bool {
    (a.l_min() - b.l_min()).abs() <= 1e-9
        && (a.l_max() - b.l_max()).abs() <= 1e-9
        && (a.delta() - b.delta()).abs() <= 1e-9
}

/// Runs one profiling session against `oracle`.
///
/// `reference`, when given, must hold the true (or recorded) mean runtime at
/// every grid point in grid order; each intermediate model is then scored by
/// SMAPE against it. Strategy exhaustion — every grid limit probed, or a
/// search bracket emptied — ends the session early with a warning rather
/// than an error.
pub fn run_session(
    oracle: &mut dyn JobOracle,
    config: &ProfilingConfig,
    reference: Option<&[f64]>,
) -> Result<SessionReport, SessionError> {
    config.validate()?;
    let grid = config.grid()?;
    let oracle_grid = oracle.grid();
    if !grids_match(&oracle_grid, &grid) {
        return Err(SessionError::GridMismatch {
            oracle_min: oracle_grid.l_min(),
            oracle_max: oracle_grid.l_max(),
            oracle_delta: oracle_grid.delta(),
            config_min: grid.l_min(),
            config_max: grid.l_max(),
            config_delta: grid.delta(),
        });
    }
    if let Some(r) = reference {
        if r.len() != grid.len() {
            return Err(SessionError::InvalidConfig(format!(
                "reference curve has {} values but the grid has {} points",
                r.len(),
                grid.len()
            )));
        }
    }

    let mut warnings: Vec<String> = Vec::new();
    let selection = initial_limits(&grid, config.n_initial, config.anchor_fraction)?;
    warnings.extend(selection.warnings.iter().map(|w| w.to_string()));

    // The initial batch is designed to run concurrently (Σ limits ≤ l_max),
    // so a parallel-capable oracle is charged only its slowest member.
    let mut probes: Vec<ProbeRecord> = Vec::new();
    let mut points: Vec<ProfilePoint> = Vec::new();
    let mut batch_durations: Vec<f64> = Vec::new();
    for (i, &limit) in selection.limits.iter().enumerate() {
        let outcome = oracle.probe(limit, &config.stopping)?;
        probes.push(probe_record(i + 1, &outcome.point, outcome.duration_seconds, true));
        points.push(outcome.point);
        batch_durations.push(outcome.duration_seconds);
    }
    let mut total_time = if oracle.supports_parallel() {
        batch_durations.iter().copied().fold(0.0, f64::max)
    } else {
        batch_durations.iter().sum()
    };

    let anchor = points[0];
    let target = synthetic_target(&anchor, &grid, config.stopping.min_samples)?;
    if let Some(w) = target.warning {
        warnings.push(w.to_string());
    }
    let target_runtime = target.target_runtime;

    let mut state = StrategyState::new(config.strategy, grid, target_runtime, config.seed)?;
    for &p in &points {
        state.observe(p)?;
    }

    // Model chain: refit after the batch and after every sequential probe.
    // NMS warm-starts each fit from the previous one — exactly the chain the
    // strategy itself maintains — while the other strategies fit cold.
    let mut models: Vec<StepModel> = Vec::new();
    let mut last_model: Option<RuntimeModel> = None;
    let push_model = |points: &[ProfilePoint],
                      last_model: &mut Option<RuntimeModel>,
                      cumulative: f64,
                      models: &mut Vec<StepModel>|
     -> Result<(), SessionError> {
        let warm = if config.strategy == StrategyKind::Nms { last_model.as_ref() } else { None };
        let outcome = fit(points, warm)?;
        *last_model = Some(outcome.model);
        let inversion = outcome.model.invert(target_runtime, &grid)?;
        let smape_vs_reference = match reference {
            Some(r) => {
                let predictions = outcome.model.predictions_on(&grid)?;
                Some(smape(r, &predictions, SmapeConfig::default())?)
            }
            None => None,
        };
        models.push(StepModel {
            step: points.len(),
            model: outcome.model,
            residual_norm: outcome.residual_norm,
            smape_vs_reference,
            cumulative_time_seconds: cumulative,
            recommended_limit: inversion.limit,
            target_unreachable: inversion.target_unreachable,
        });
        Ok(())
    };
    push_model(&points, &mut last_model, total_time, &mut models)?;

    while points.len() < config.max_steps {
        let limit = match state.next_limit() {
            Ok(limit) => limit,
            Err(SelectionError::Exhausted) => {
                warnings.push(format!(
                    "strategy {} exhausted after {} probes (budget was {}); stopping early",
                    config.strategy,
                    points.len(),
                    config.max_steps
                ));
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let outcome = oracle.probe(limit, &config.stopping)?;
        total_time += outcome.duration_seconds;
        probes.push(probe_record(
            points.len() + 1,
            &outcome.point,
            outcome.duration_seconds,
            false,
        ));
        points.push(outcome.point);
        state.observe(outcome.point)?;
        push_model(&points, &mut last_model, total_time, &mut models)?;
    }

    let last = models.last().expect("at least the initial-batch model exists");
    Ok(SessionReport {
        strategy: config.strategy,
        target_limit: anchor.cpu_limit,
        target_runtime,
        recommended_limit: last.recommended_limit,
        target_unreachable: last.target_unreachable,
        probes,
        models,
        total_time_seconds: total_time,
        warnings,
    })
}

fn probe_record(step: usize, point: &ProfilePoint, duration: f64, initial: bool) -> ProbeRecord {
    ProbeRecord {
        step,
        cpu_limit: point.cpu_limit,
        mean_runtime: point.mean_runtime,
        n_samples: point.n_samples,
        sample_variance: point.sample_variance,
        ci_width: point.ci_width,
        duration_seconds: duration,
        initial,
    }
}

// ─── Benchmarks ───

/// One benchmark measurement: a strategy's model quality and cost after
/// `step` total probes in one (config, repetition) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub config_index: usize,
    pub repetition: usize,
    pub strategy: StrategyKind,
    /// Total probes used (n_initial+1 ..= max_steps).
    pub step: usize,
    /// Absent when the session failed, exhausted before this step, or ran
    /// without a reference curve.
    pub smape: Option<f64>,
    pub cumulative_time_seconds: Option<f64>,
}

/// Win tallies for one strategy across all (config, repetition, step) cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyWins {
    pub strategy: StrategyKind,
    /// Wins at zero tolerance (strictly lowest SMAPE, ties shared).
    pub wins_0: u64,
    /// Wins within 10% of the per-cell minimum SMAPE.
    pub wins_10: u64,
}

/// Everything a strategy shoot-out produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub strategies: Vec<StrategyKind>,
    pub repetitions: usize,
    pub rows: Vec<BenchmarkRow>,
    pub wins: Vec<StrategyWins>,
    /// Human-readable descriptions of cells that failed; failed cells leave
    /// absent measurements but never abort the benchmark.
    pub failures: Vec<String>,
}

/// Builds the oracle (and optional reference curve) for one benchmark cell.
///
/// Called once per (config, repetition, strategy) with the config's index,
/// the config itself, and the cell's oracle seed. The seed is derived from
/// the master seed and the (config, repetition) coordinates only — *not* the
/// strategy — so all strategies in a cell face identical noise.
pub type OracleFactory<'a> = dyn Fn(usize, &ProfilingConfig, u64) -> Result<(Box<dyn JobOracle>, Option<Vec<f64>>), OracleError>
    + 'a;

// Domain tags keeping oracle-seed and strategy-seed derivations disjoint.
const ORACLE_SEED_TAG: u64 = 1;
const STRATEGY_SEED_TAG: u64 = 2;

/// Crosses `configs` × `strategies` × `repetitions`, running one session per
/// cell and collecting per-step SMAPE/cost rows plus win tallies.
///
/// Rows cover the full cross product (steps n_initial+1 ..= max_steps) in a
/// deterministic order; sessions that fail or stop early leave `None`
/// measurements. The entire report is a pure function of the inputs and
/// `master_seed`.
pub fn run_benchmark(
    configs: &[ProfilingConfig],
    strategies: &[StrategyKind],
    repetitions: usize,
    master_seed: u64,
    factory: &OracleFactory,
) -> Result<BenchmarkReport, SessionError> {
    if configs.is_empty() {
        return Err(SessionError::InvalidConfig("no configurations to benchmark".into()));
    }
    if strategies.is_empty() {
        return Err(SessionError::InvalidConfig("no strategies to benchmark".into()));
    }
    if repetitions == 0 {
        return Err(SessionError::InvalidConfig("repetitions must be at least 1".into()));
    }
    for (ci, config) in configs.iter().enumerate() {
        config.validate().map_err(|e| {
            SessionError::InvalidConfig(format!("benchmark config {ci}: {e}"))
        })?;
    }

    let mut rows: Vec<BenchmarkRow> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    // Per-(cell, step) SMAPE columns for the win tallies.
    let mut score_rows: Vec<Vec<f64>> = Vec::new();

    for (ci, config) in configs.iter().enumerate() {
        let steps: Vec<usize> = (config.n_initial + 1..=config.max_steps).collect();
        for rep in 0..repetitions {
            let oracle_seed =
                crate::derive_seed(master_seed, &[ORACLE_SEED_TAG, ci as u64, rep as u64]);
            // One slot per step × strategy, NaN until a session fills it.
            let mut cell_scores = vec![vec![f64::NAN; strategies.len()]; steps.len()];

            for (si, &strategy) in strategies.iter().enumerate() {
                let mut cell_config = config.clone();
                cell_config.strategy = strategy;
                cell_config.seed = crate::derive_seed(
                    master_seed,
                    &[STRATEGY_SEED_TAG, ci as u64, rep as u64, si as u64],
                );

                let session = factory(ci, &cell_config, oracle_seed)
                    .map_err(SessionError::from)
                    .and_then(|(mut oracle, reference)| {
                        run_session(oracle.as_mut(), &cell_config, reference.as_deref())
                    });

                let report = match session {
                    Ok(report) => Some(report),
                    Err(e) => {
                        failures.push(format!(
                            "config {ci} repetition {rep} strategy {strategy}: {e}"
                        ));
                        None
                    }
                };

                for (step_idx, &step) in steps.iter().enumerate() {
                    let model = report
                        .as_ref()
                        .and_then(|r| r.models.iter().find(|m| m.step == step));
                    let smape = model.and_then(|m| m.smape_vs_reference);
                    if let Some(s) = smape {
                        cell_scores[step_idx][si] = s;
                    }
                    rows.push(BenchmarkRow {
                        config_index: ci,
                        repetition: rep,
                        strategy,
                        step,
                        smape,
                        cumulative_time_seconds: model.map(|m| m.cumulative_time_seconds),
                    });
                }
            }
            score_rows.extend(cell_scores);
        }
    }

    let wins = if score_rows.is_empty() {
        // Every config had max_steps == n_initial: no sequential steps to
        // score, so every tally is zero.
        strategies
            .iter()
            .map(|&s| StrategyWins { strategy: s, wins_0: 0, wins_10: 0 })
            .collect()
    } else {
        let strict = count_wins(&score_rows, 0.0)?;
        let tolerant = count_wins(&score_rows, 0.10)?;
        strategies
            .iter()
            .zip(strict.iter().zip(&tolerant))
            .map(|(&strategy, (&wins_0, &wins_10))| StrategyWins { strategy, wins_0, wins_10 })
            .collect()
    };

    Ok(BenchmarkReport {
        strategies: strategies.to_vec(),
        repetitions,
        rows,
        wins,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ProbeOutcome, SyntheticOracle};
    use approx::assert_relative_eq;

    fn truth() -> RuntimeModel {
        RuntimeModel::tier4(2.0, 0.8, 0.3)
    }

    fn demo_config() -> ProfilingConfig {
        ProfilingConfig {
            stopping: StoppingRule::fixed(4),
            ..ProfilingConfig::default()
        }
    }

    fn noiseless_oracle(config: &ProfilingConfig) -> SyntheticOracle {
        SyntheticOracle::new(truth(), config.grid().unwrap(), 0.0, 1).unwrap()
    }

    /// Delegating wrapper that forbids parallel probes, for accounting tests.
    struct Sequentialized(SyntheticOracle);

    impl JobOracle for Sequentialized {
        fn grid(&self) -> LimitGrid {
            self.0.grid()
        }
        fn supports_parallel(&self) -> bool {
            false
        }
        fn probe(&mut self, limit: f64, rule: &StoppingRule) -> Result<ProbeOutcome, OracleError> {
            self.0.probe(limit, rule)
        }
    }

    #[test]
    fn config_validation() {
        assert!(demo_config().validate().is_ok());
        let mut c = demo_config();
        c.n_initial = 5;
        assert!(c.validate().is_err());
        let mut c = demo_config();
        c.max_steps = 2; // below n_initial = 3
        assert!(c.validate().is_err());
        let mut c = demo_config();
        c.anchor_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = demo_config();
        c.delta = 0.3; // span not a multiple
        assert!(c.validate().is_err());
    }

    #[test]
    fn parallel_initial_batch_costs_its_slowest_member() {
        let config = demo_config();
        let mut oracle = noiseless_oracle(&config);
        let report = run_session(&mut oracle, &config, None).unwrap();

        // Noise-free: every probe duration is n·truth(limit) exactly.
        let n = config.stopping.min_samples as f64;
        let batch_max = report
            .probes
            .iter()
            .filter(|p| p.initial)
            .map(|p| p.duration_seconds)
            .fold(0.0, f64::max);
        let sequential: f64 = report
            .probes
            .iter()
            .filter(|p| !p.initial)
            .map(|p| p.duration_seconds)
            .sum();
        assert_relative_eq!(
            report.total_time_seconds,
            batch_max + sequential,
            max_relative = 1e-12
        );
        // The slowest initial probe is the anchor (smallest limit).
        assert_relative_eq!(
            batch_max,
            n * truth().eval(0.2).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn sequential_oracle_charges_the_batch_sum() {
        let config = demo_config();
        let mut parallel = noiseless_oracle(&config);
        let mut sequential = Sequentialized(noiseless_oracle(&config));
        let par = run_session(&mut parallel, &config, None).unwrap();
        let seq = run_session(&mut sequential, &config, None).unwrap();

        let batch: Vec<f64> = par
            .probes
            .iter()
            .filter(|p| p.initial)
            .map(|p| p.duration_seconds)
            .collect();
        let expected_gap: f64 =
            batch.iter().sum::<f64>() - batch.iter().copied().fold(0.0, f64::max);
        assert_relative_eq!(
            seq.total_time_seconds - par.total_time_seconds,
            expected_gap,
            max_relative = 1e-12
        );
    }

    #[test]
    fn report_records_every_probe_and_model() {
        let config = demo_config();
        let mut oracle = noiseless_oracle(&config);
        let reference = oracle.reference();
        let report = run_session(&mut oracle, &config, Some(&reference)).unwrap();

        assert_eq!(report.probes.len(), config.max_steps);
        for (i, p) in report.probes.iter().enumerate() {
            assert_eq!(p.step, i + 1);
            assert_eq!(p.initial, i < config.n_initial);
            assert_eq!(p.n_samples, config.stopping.min_samples);
        }
        assert_eq!(report.models.len(), config.max_steps - config.n_initial + 1);
        for (k, m) in report.models.iter().enumerate() {
            assert_eq!(m.step, config.n_initial + k);
            assert!(m.smape_vs_reference.is_some());
            let grid = config.grid().unwrap();
            assert!(grid.index_of(m.recommended_limit).is_some());
        }
        // Cumulative cost is non-decreasing and ends at the session total.
        for pair in report.models.windows(2) {
            assert!(pair[1].cumulative_time_seconds >= pair[0].cumulative_time_seconds);
        }
        assert_relative_eq!(
            report.models.last().unwrap().cumulative_time_seconds,
            report.total_time_seconds,
            max_relative = 1e-12
        );
        // Noise-free session: SMAPE collapses as points accumulate, and the
        // recommendation settles on the true inverse's grid cell.
        let last = report.models.last().unwrap();
        assert!(last.smape_vs_reference.unwrap() < 1e-6);
        assert_eq!(report.recommended_limit, last.recommended_limit);
    }

    #[test]
    fn target_is_the_anchor_measurement() {
        let config = demo_config();
        let mut oracle = noiseless_oracle(&config);
        let report = run_session(&mut oracle, &config, None).unwrap();
        assert_eq!(report.target_limit, 0.2);
        assert_eq!(report.target_runtime, truth().eval(0.2).unwrap());
    }

    #[test]
    fn exhausted_strategy_stops_early_with_a_warning() {
        // 6-point grid, budget of 6 probes: binary search empties its
        // bracket long before using the budget.
        let config = ProfilingConfig {
            l_min: 0.1,
            l_max: 0.6,
            delta: 0.1,
            n_initial: 2,
            max_steps: 6,
            strategy: StrategyKind::BinarySearch,
            stopping: StoppingRule::fixed(4),
            ..ProfilingConfig::default()
        };
        let mut oracle = noiseless_oracle(&config);
        let report = run_session(&mut oracle, &config, None).unwrap();
        assert!(report.probes.len() < config.max_steps);
        assert!(report.warnings.iter().any(|w| w.contains("exhausted")));
        assert_eq!(
            report.models.len(),
            report.probes.len() - config.n_initial + 1
        );
    }

    #[test]
    fn nms_session_models_match_the_strategy_chain() {
        let config = ProfilingConfig { seed: 9, ..demo_config() };
        let mut oracle = SyntheticOracle::new(truth(), config.grid().unwrap(), 0.05, 5).unwrap();
        let report = run_session(&mut oracle, &config, None).unwrap();

        // Re-fit the same observation prefixes with the same warm chain; the
        // session's recorded models must reproduce bit-for-bit.
        let points: Vec<ProfilePoint> = report
            .probes
            .iter()
            .map(|p| {
                ProfilePoint::from_parts(
                    p.cpu_limit,
                    p.mean_runtime,
                    p.n_samples,
                    p.sample_variance,
                    p.ci_width,
                )
                .unwrap()
            })
            .collect();
        let mut warm: Option<RuntimeModel> = None;
        for (k, m) in report.models.iter().enumerate() {
            let outcome = fit(&points[..config.n_initial + k], warm.as_ref()).unwrap();
            assert_eq!(outcome.model, m.model, "model after step {}", m.step);
            warm = Some(outcome.model);
        }
    }

    #[test]
    fn mismatched_oracle_grid_is_rejected() {
        let config = demo_config();
        let other = LimitGrid::new(0.1, 2.0, 0.1).unwrap();
        let mut oracle = SyntheticOracle::new(truth(), other, 0.0, 1).unwrap();
        assert!(matches!(
            run_session(&mut oracle, &config, None),
            Err(SessionError::GridMismatch { .. })
        ));
    }

    #[test]
    fn reference_length_is_validated() {
        let config = demo_config();
        let mut oracle = noiseless_oracle(&config);
        let short = vec![1.0; 5];
        assert!(matches!(
            run_session(&mut oracle, &config, Some(&short)),
            Err(SessionError::InvalidConfig(_))
        ));
    }

    fn synthetic_factory(
        sigma: f64,
    ) -> impl Fn(usize, &ProfilingConfig, u64) -> Result<(Box<dyn JobOracle>, Option<Vec<f64>>), OracleError>
    {
        move |_ci, config, oracle_seed| {
            let grid = config.grid().map_err(OracleError::from)?;
            let oracle = SyntheticOracle::new(truth(), grid, sigma, oracle_seed)?;
            let reference = oracle.reference();
            Ok((Box::new(oracle), Some(reference)))
        }
    }

    #[test]
    fn benchmark_emits_the_full_cross_product() {
        let config = ProfilingConfig { max_steps: 5, ..demo_config() };
        let strategies = [StrategyKind::Nms, StrategyKind::Random];
        let report =
            run_benchmark(&[config], &strategies, 2, 7, &synthetic_factory(0.05)).unwrap();

        // 1 config × 2 reps × 2 strategies × steps {4, 5}.
        assert_eq!(report.rows.len(), 8);
        assert!(report.failures.is_empty());
        for row in &report.rows {
            assert!(row.smape.is_some());
            assert!(row.cumulative_time_seconds.is_some());
            assert!(row.step == 4 || row.step == 5);
        }
        assert_eq!(report.wins.len(), 2);
        // Each (rep, step) cell awards ≥ 1 strict win and tolerance only
        // ever adds wins.
        let strict: u64 = report.wins.iter().map(|w| w.wins_0).sum();
        assert!(strict >= 4);
        for w in &report.wins {
            assert!(w.wins_10 >= w.wins_0);
        }
    }

    #[test]
    fn benchmark_is_deterministic_per_master_seed() {
        let config = ProfilingConfig { max_steps: 5, ..demo_config() };
        let strategies = [StrategyKind::Nms, StrategyKind::Random];
        let a = run_benchmark(&[config.clone()], &strategies, 2, 7, &synthetic_factory(0.05))
            .unwrap();
        let b = run_benchmark(&[config.clone()], &strategies, 2, 7, &synthetic_factory(0.05))
            .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = run_benchmark(&[config], &strategies, 2, 8, &synthetic_factory(0.05)).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn oracle_seeds_are_shared_across_strategies_within_a_cell() {
        use std::cell::RefCell;
        let seen: RefCell<Vec<u64>> = RefCell::new(Vec::new());
        let factory = |_ci: usize,
                       config: &ProfilingConfig,
                       oracle_seed: u64|
         -> Result<(Box<dyn JobOracle>, Option<Vec<f64>>), OracleError> {
            seen.borrow_mut().push(oracle_seed);
            let grid = config.grid().map_err(OracleError::from)?;
            Ok((Box::new(SyntheticOracle::new(truth(), grid, 0.0, oracle_seed)?), None))
        };
        let config = ProfilingConfig { max_steps: 4, ..demo_config() };
        let strategies = [StrategyKind::Nms, StrategyKind::Random];
        run_benchmark(&[config], &strategies, 2, 99, &factory).unwrap();

        let seen = seen.borrow();
        // Call order: (rep 0: both strategies), (rep 1: both strategies).
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[0], seen[1], "strategies within a cell share the oracle seed");
        assert_eq!(seen[2], seen[3]);
        assert_ne!(seen[0], seen[2], "repetitions draw fresh oracle seeds");
    }

    #[test]
    fn failed_cells_leave_gaps_but_not_aborts() {
        let factory = |_ci: usize,
                       config: &ProfilingConfig,
                       oracle_seed: u64|
         -> Result<(Box<dyn JobOracle>, Option<Vec<f64>>), OracleError> {
            if config.strategy == StrategyKind::Random {
                return Err(OracleError::InvalidConfig("synthetic failure".into()));
            }
            let grid = config.grid().map_err(OracleError::from)?;
            let oracle = SyntheticOracle::new(truth(), grid, 0.0, oracle_seed)?;
            let reference = oracle.reference();
            Ok((Box::new(oracle), Some(reference)))
        };
        let config = ProfilingConfig { max_steps: 5, ..demo_config() };
        let strategies = [StrategyKind::Nms, StrategyKind::Random];
        let report = run_benchmark(&[config], &strategies, 1, 3, &factory).unwrap();

        assert_eq!(report.failures.len(), 1);
        assert!(report.failures[0].contains("random"));
        // The failed strategy's rows exist with absent measurements.
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            match row.strategy {
                StrategyKind::Random => assert!(row.smape.is_none()),
                _ => assert!(row.smape.is_some()),
            }
        }
        // And the surviving strategy takes every win by default.
        let nms = report.wins.iter().find(|w| w.strategy == StrategyKind::Nms).unwrap();
        assert_eq!(nms.wins_0, 2);
    }

    #[test]
    fn benchmark_input_validation() {
        let factory = synthetic_factory(0.0);
        assert!(run_benchmark(&[], &[StrategyKind::Nms], 1, 0, &factory).is_err());
        assert!(run_benchmark(&[demo_config()], &[], 1, 0, &factory).is_err());
        assert!(run_benchmark(&[demo_config()], &[StrategyKind::Nms], 0, 0, &factory).is_err());
        let bad = ProfilingConfig { n_initial: 9, ..demo_config() };
        assert!(run_benchmark(&[bad], &[StrategyKind::Nms], 1, 0, &factory).is_err());
    }
}
