//! Job oracles: the things a profiling session probes.
//!
//! An oracle answers exactly one question — "run the job under CPU limit R
//! and stream per-sample runtimes until the stopping rule says enough" — and
//! returns the aggregated [`ProfilePoint`] plus the time the probe cost.
//! Three implementations cover the practical cases:
//!
//! * [`SyntheticOracle`] — draws samples from a ground-truth runtime curve
//!   with multiplicative lognormal noise, r = f(R)·exp(ε), ε ~ N(0, σ²).
//!   Every sample is seeded individually from (seed, grid index, sample
//!   index), so runs are bit-for-bit reproducible and independent of probe
//!   order. Note E[r] = f(R)·exp(σ²/2), not f(R): the noise is unbiased in
//!   log space, and the profiler estimates this *noisy* mean.
//! * [`TraceOracle`] — replays pre-recorded runtimes from a CSV trace
//!   (`cpu_limit,sample_index,runtime_seconds`), inferring the limit grid
//!   from the distinct limits present. Each probe consumes the per-limit
//!   series in order; re-probing continues where the last probe stopped.
//! * [`CommandOracle`] — runs a user command (`{limit}` substituted) under
//!   `sh -c` and reads one runtime per stdout line, killing the process once
//!   the stopping rule is satisfied.
//!
//! Probe "duration" is the simulated cost Σ sampleᵢ for the first two (the
//! job is assumed to process samples back-to-back) and wall-clock time for
//! the command oracle.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::derive_seed;
use crate::model::{ModelError, ProfilePoint, RuntimeModel};
use crate::selection::{LimitGrid, SelectionError};
use crate::stopping::{RunningStats, StoppingError, StoppingRule};

/// Errors from probing a job oracle or loading a trace.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("trace error at line {line}: {message}")]
    Trace { line: u64, message: String },
    #[error("trace series for limit {limit} is exhausted after {available} samples")]
    TraceExhausted { limit: f64, available: usize },
    #[error("no runtime line from the command within {seconds} s")]
    Timeout { seconds: f64 },
    #[error("command ended after {got} samples, before the stopping rule was satisfied")]
    CommandEnded { got: u64 },
    #[error("unparseable runtime line from command output: {0:?}")]
    BadOutput(String),
    #[error("per-sample runtimes must be positive and finite, got {0}")]
    BadSample(f64),
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error("limit {0} is not on the oracle's grid")]
    OffGrid(f64),
    #[error(transparent)]
    Grid(#[from] SelectionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stopping(#[from] StoppingError),
}

/// One completed probe: the aggregated point and what it cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub point: ProfilePoint,
    /// Simulated duration (Σ per-sample runtimes) for synthetic/trace
    /// oracles; wall-clock seconds for command oracles.
    pub duration_seconds: f64,
}

/// A black-box job that can be profiled at grid CPU limits.
pub trait JobOracle {
    /// The grid of admissible CPU limits.
    fn grid(&self) -> LimitGrid;

    /// Whether several probes of this oracle may run concurrently, which
    /// lets the session count the initial batch at the cost of its slowest
    /// member instead of the sum.
    fn supports_parallel(&self) -> bool;

    /// Streams per-sample runtimes at `limit` until `rule` says stop, then
    /// aggregates them.
    fn probe(&mut self, limit: f64, rule: &StoppingRule)
        -> Result<ProbeOutcome, OracleError>;
}

/// Pulls samples from `next` until the stopping rule fires; returns the
/// running aggregate and the exact sample sum (the simulated probe cost).
fn collect_samples(
    rule: &StoppingRule,
    mut next: impl FnMut() -> Result<f64, OracleError>,
) -> Result<(RunningStats, f64), OracleError> {
    rule.validate()?;
    let mut stats = RunningStats::new();
    let mut total = 0.0;
    loop {
        let sample = next()?;
        if !(sample > 0.0 && sample.is_finite()) {
            return Err(OracleError::BadSample(sample));
        }
        stats.push(sample);
        total += sample;
        if rule.should_stop(&stats)? {
            return Ok((stats, total));
        }
    }
}

fn point_from_stats(
    limit: f64,
    stats: &RunningStats,
    rule: &StoppingRule,
) -> Result<ProfilePoint, OracleError> {
    let width = rule.ci_width(stats)?;
    Ok(ProfilePoint::from_parts(
        limit,
        stats.mean(),
        stats.count(),
        stats.sample_variance(),
        width,
    )?)
}

// ─── Synthetic oracle ───

/// Simulated job with a known ground-truth runtime curve and multiplicative
/// lognormal noise.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    truth: RuntimeModel,
    grid: LimitGrid,
    sigma: f64,
    seed: u64,
    /// Next sample index per grid point, so re-probes continue the stream.
    next_sample: Vec<u64>,
}

impl SyntheticOracle {
    /// `sigma` is the noise scale in log space (0 disables noise entirely).
    pub fn new(
        truth: RuntimeModel,
        grid: LimitGrid,
        sigma: f64,
        seed: u64,
    ) -> Result<Self, OracleError> {
        truth.validate()?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(OracleError::InvalidConfig(format!(
                "noise sigma must be non-negative and finite, got {sigma}"
            )));
        }
        let len = grid.len();
        Ok(Self { truth, grid, sigma, seed, next_sample: vec![0; len] })
    }

    pub fn truth(&self) -> &RuntimeModel {
        &self.truth
    }

    /// Ground-truth mean runtimes across the grid (noise-free), the natural
    /// reference vector for scoring fitted models.
    pub fn reference(&self) -> Vec<f64> {
        self.truth.predictions_on(&self.grid).expect("grid limits are positive")
    }

    fn sample(&mut self, idx: usize) -> f64 {
        let k = self.next_sample[idx];
        self.next_sample[idx] += 1;
        let base = self.truth.eval(self.grid.limit_at(idx)).expect("grid limits are positive");
        if self.sigma == 0.0 {
            return base;
        }
        // One independent, order-insensitive draw per (grid point, sample).
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[idx as u64, k]));
        let eps: f64 = rng.sample(StandardNormal);
        base * (self.sigma * eps).exp()
    }

    /// Draws `samples_per_limit` samples at every grid point (continuing
    /// each per-limit stream), e.g. to materialize a replayable trace via
    /// [`write_trace`].
    pub fn draw_series(&mut self, samples_per_limit: u64) -> Vec<Vec<f64>> {
        (0..self.grid.len())
            .map(|idx| (0..samples_per_limit).map(|_| self.sample(idx)).collect())
            .collect()
    }
}

impl JobOracle for SyntheticOracle {
    fn grid(&self) -> LimitGrid {
        self.grid
    }

    fn supports_parallel(&self) -> bool {
        true
    }

    fn probe(&mut self, limit: f64, rule: &StoppingRule) -> Result<ProbeOutcome, OracleError> {
        let idx = self.grid.index_of(limit).ok_or(OracleError::OffGrid(limit))?;
        let (stats, total) = collect_samples(rule, || Ok(self.sample(idx)))?;
        Ok(ProbeOutcome {
            point: point_from_stats(limit, &stats, rule)?,
            duration_seconds: total,
        })
    }
}

// ─── Trace oracle ───

const TRACE_HEADER: [&str; 3] = ["cpu_limit", "sample_index", "runtime_seconds"];

/// Replays pre-recorded per-sample runtimes from a trace.
///
/// The limit grid is inferred from the distinct limits in the trace: they
/// must form a uniform ladder (spacing = the minimal gap, all gaps equal
/// within 1e−9) of at least two rungs. Probes consume each limit's series in
/// `sample_index` order and fail with [`OracleError::TraceExhausted`] when a
/// stopping rule wants more samples than were recorded. [`reset`] rewinds
/// every series for replay (e.g. across benchmark repetitions).
///
/// [`reset`]: TraceOracle::reset
#[derive(Debug, Clone)]
pub struct TraceOracle {
    grid: LimitGrid,
    series: Vec<Vec<f64>>,
    cursors: Vec<usize>,
}

/// Loads a trace CSV (`cpu_limit,sample_index,runtime_seconds`) from disk.
pub fn load_trace(path: impl AsRef<Path>) -> Result<TraceOracle, OracleError> {
    let file = std::fs::File::open(path)?;
    TraceOracle::from_reader(io::BufReader::new(file))
}

impl TraceOracle {
    pub fn from_reader(reader: impl io::Read) -> Result<Self, OracleError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let headers = csv_reader
            .headers()
            .map_err(|e| OracleError::Trace { line: 1, message: e.to_string() })?
            .clone();
        if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
            return Err(OracleError::Trace {
                line: 1,
                message: format!(
                    "header must be {:?}, got {:?}",
                    TRACE_HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }

        // Group samples by decimal-cleaned limit; remember source lines so
        // schema errors can point at the offending row.
        let mut groups: BTreeMap<i64, Vec<(u64, f64, u64)>> = BTreeMap::new();
        for record in csv_reader.records() {
            let record = record.map_err(|e| OracleError::Trace {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let trace_err =
                |message: String| OracleError::Trace { line, message };
            if record.len() != 3 {
                return Err(trace_err(format!("expected 3 fields, got {}", record.len())));
            }
            let limit: f64 = record[0]
                .parse()
                .map_err(|_| trace_err(format!("unparseable cpu_limit {:?}", &record[0])))?;
            let index: u64 = record[1]
                .parse()
                .map_err(|_| trace_err(format!("unparseable sample_index {:?}", &record[1])))?;
            let runtime: f64 = record[2]
                .parse()
                .map_err(|_| trace_err(format!("unparseable runtime_seconds {:?}", &record[2])))?;
            if !(limit > 0.0 && limit.is_finite()) {
                return Err(trace_err(format!("cpu_limit must be positive, got {limit}")));
            }
            if !(runtime > 0.0 && runtime.is_finite()) {
                return Err(trace_err(format!(
                    "runtime_seconds must be positive, got {runtime}"
                )));
            }
            let key = (limit * 1e9).round() as i64;
            groups.entry(key).or_default().push((index, runtime, line));
        }

        if groups.len() < 2 {
            return Err(OracleError::Trace {
                line: 0,
                message: format!(
                    "a trace needs at least 2 distinct cpu_limit values to infer a grid, got {}",
                    groups.len()
                ),
            });
        }

        // Infer the uniform grid: spacing = minimal gap, every gap equal.
        let keys: Vec<i64> = groups.keys().copied().collect();
        let gaps: Vec<i64> = keys.windows(2).map(|w| w[1] - w[0]).collect();
        let delta_key = *gaps.iter().min().expect("at least one gap exists");
        if let Some(bad) = gaps.iter().find(|&&g| g != delta_key) {
            return Err(OracleError::Trace {
                line: 0,
                message: format!(
                    "cpu_limit values are not uniformly spaced: saw gaps {} and {}",
                    delta_key as f64 / 1e9,
                    *bad as f64 / 1e9
                ),
            });
        }
        // Divide by the exactly-representable 1e9 (never multiply by the
        // inexact 1e-9) so each key maps back to its canonical decimal double.
        let l_min = *keys.first().expect("non-empty") as f64 / 1e9;
        let l_max = *keys.last().expect("non-empty") as f64 / 1e9;
        let grid = LimitGrid::new(l_min, l_max, delta_key as f64 / 1e9)?;

        // Every grid point between l_min and l_max must have a series.
        if groups.len() != grid.len() {
            return Err(OracleError::Trace {
                line: 0,
                message: format!(
                    "trace covers {} distinct limits but the inferred grid has {} points",
                    groups.len(),
                    grid.len()
                ),
            });
        }

        let mut series = Vec::with_capacity(groups.len());
        for (key, mut entries) in groups {
            entries.sort_by_key(|&(index, _, _)| index);
            for pair in entries.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(OracleError::Trace {
                        line: pair[1].2,
                        message: format!(
                            "duplicate sample_index {} for cpu_limit {}",
                            pair[1].0,
                            key as f64 / 1e9
                        ),
                    });
                }
            }
            series.push(entries.into_iter().map(|(_, runtime, _)| runtime).collect::<Vec<_>>());
        }

        let cursors = vec![0; series.len()];
        Ok(Self { grid, series, cursors })
    }

    /// Rewinds every per-limit series to its beginning.
    pub fn reset(&mut self) {
        self.cursors.iter_mut().for_each(|c| *c = 0);
    }

    /// Mean recorded runtime per grid point (over each full series), in grid
    /// order — the reference vector for scoring fits against a trace.
    pub fn series_means(&self) -> Vec<f64> {
        self.series
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect()
    }

    /// Number of recorded samples at a grid limit.
    pub fn series_len(&self, limit: f64) -> Option<usize> {
        self.grid.index_of(limit).map(|i| self.series[i].len())
    }
}

impl JobOracle for TraceOracle {
    fn grid(&self) -> LimitGrid {
        self.grid
    }

    fn supports_parallel(&self) -> bool {
        true
    }

    fn probe(&mut self, limit: f64, rule: &StoppingRule) -> Result<ProbeOutcome, OracleError> {
        let idx = self.grid.index_of(limit).ok_or(OracleError::OffGrid(limit))?;
        let available = self.series[idx].len();
        let (stats, total) = {
            let series = &self.series[idx];
            let cursor = &mut self.cursors[idx];
            collect_samples(rule, || match series.get(*cursor) {
                Some(&sample) => {
                    *cursor += 1;
                    Ok(sample)
                }
                None => Err(OracleError::TraceExhausted { limit, available }),
            })?
        };
        Ok(ProbeOutcome {
            point: point_from_stats(limit, &stats, rule)?,
            duration_seconds: total,
        })
    }
}

/// Writes a trace CSV (`cpu_limit,sample_index,runtime_seconds`) that
/// [`load_trace`] can replay. `series[i]` holds the samples for grid point i.
pub fn write_trace(
    writer: impl io::Write,
    grid: &LimitGrid,
    series: &[Vec<f64>],
) -> Result<(), OracleError> {
    if series.len() != grid.len() {
        return Err(OracleError::InvalidConfig(format!(
            "trace needs one series per grid point: grid has {} points, got {} series",
            grid.len(),
            series.len()
        )));
    }
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(TRACE_HEADER)?;
    for (idx, samples) in series.iter().enumerate() {
        let limit = grid.limit_at(idx);
        for (k, &runtime) in samples.iter().enumerate() {
            csv_writer.serialize((limit, k as u64, runtime)).map_err(io_from_csv)?;
        }
    }
    csv_writer.flush()?;
    Ok(())
}

fn io_from_csv(e: csv::Error) -> OracleError {
    OracleError::Io(io::Error::other(e))
}

impl From<csv::Error> for OracleError {
    fn from(e: csv::Error) -> Self {
        io_from_csv(e)
    }
}

// ─── Command oracle ───

/// Profiles a real job: runs a shell command with `{limit}` substituted and
/// treats each stdout line as one per-sample runtime in seconds.
///
/// The child is killed as soon as the stopping rule is satisfied (or on any
/// error), so commands should be written to stream indefinitely. Probes are
/// serialized — a real machine can't honor overlapping CPU limits — hence
/// `supports_parallel` is false and sessions charge initial probes at the
/// sum of their durations.
#[derive(Debug, Clone)]
pub struct CommandOracle {
    template: String,
    grid: LimitGrid,
    sample_timeout: Duration,
}

impl CommandOracle {
    /// `template` must contain the `{limit}` placeholder; `sample_timeout`
    /// bounds the wait for each output line.
    pub fn new(
        template: impl Into<String>,
        grid: LimitGrid,
        sample_timeout: Duration,
    ) -> Result<Self, OracleError> {
        let template = template.into();
        if !template.contains("{limit}") {
            return Err(OracleError::InvalidConfig(format!(
                "command template must contain the {{limit}} placeholder, got {template:?}"
            )));
        }
        if sample_timeout.is_zero() {
            return Err(OracleError::InvalidConfig(
                "sample timeout must be positive".to_string(),
            ));
        }
        Ok(Self { template, grid, sample_timeout })
    }
}

/// Kills and reaps the child no matter how the probe ends.
struct ChildGuard(Child);

impl Drop for ChildGuard {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

impl JobOracle for CommandOracle {
    fn grid(&self) -> LimitGrid {
        self.grid
    }

    fn supports_parallel(&self) -> bool {
        false
    }

    fn probe(&mut self, limit: f64, rule: &StoppingRule) -> Result<ProbeOutcome, OracleError> {
        let idx = self.grid.index_of(limit).ok_or(OracleError::OffGrid(limit))?;
        let command = self.template.replace("{limit}", &self.grid.limit_at(idx).to_string());

        let started = Instant::now();
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdout = child.stdout.take().expect("stdout was piped");
        let _guard = ChildGuard(child);

        // A reader thread forwards lines over a channel so the probe loop can
        // enforce the per-sample timeout with recv_timeout.
        let (tx, rx) = mpsc::channel::<io::Result<String>>();
        let reader_thread = std::thread::spawn(move || {
            use io::BufRead;
            for line in io::BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break; // probe loop stopped listening
                }
            }
        });

        let timeout = self.sample_timeout;
        let mut seen = 0u64;
        let result = collect_samples(rule, || match rx.recv_timeout(timeout) {
            Ok(Ok(line)) => {
                seen += 1;
                line.trim()
                    .parse::<f64>()
                    .map_err(|_| OracleError::BadOutput(line))
            }
            Ok(Err(e)) => Err(OracleError::Io(e)),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                Err(OracleError::Timeout { seconds: timeout.as_secs_f64() })
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(OracleError::CommandEnded { got: seen })
            }
        });
        // Dropping the guard kills the shell. Grandchildren (e.g. a sleep
        // inside the template) may keep the pipe open past that, so the
        // reader thread is detached rather than joined: it exits on its own
        // at pipe EOF, and with rx gone its next send fails fast.
        drop(_guard);
        drop(rx);
        drop(reader_thread);

        let (stats, _total) = result?;
        Ok(ProbeOutcome {
            point: point_from_stats(limit, &stats, rule)?,
            duration_seconds: started.elapsed().as_secs_f64(),
        })
    }
}
