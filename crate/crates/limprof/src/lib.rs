#![forbid(unsafe_code)]
//! # limprof
//!
//! Learns how a black-box stream-processing job's per-sample runtime responds
//! to CPU limits, in as few probes as possible, and inverts the learned curve
//! to recommend the smallest CPU limit that still meets a runtime target.
//!
//! The core loop:
//!
//! 1. Probe a handful of CPU limits in parallel ([`selection::initial_limits`]),
//!    chosen so the curved low-CPU region is guaranteed to be explored while the
//!    combined CPU demand stays within one machine (sum ≤ l_max).
//! 2. Take the observed runtime at the smallest of those limits as a *synthetic
//!    target* ([`selection::synthetic_target`]) for all later steps.
//! 3. Sequentially pick the next limit to probe with a pluggable strategy
//!    ([`selection::StrategyState`]): model inversion (NMS), binary search,
//!    Bayesian optimization, or uniform random.
//! 4. After each probe, refit a tiered runtime model ([`model::fit`]) whose
//!    complexity grows with the number of points:
//!
//!    ```text
//!    f(R) = R⁻¹                  1 point
//!    f(R) = a·R⁻¹                2 points
//!    f(R) = a·R⁻ᵇ                3 points
//!    f(R) = a·R⁻ᵇ + c            4 points
//!    f(R) = a·(R·d)⁻ᵇ + c        5+ points
//!    ```
//!
//! 5. Within each probe, stop sampling early once the Student-t confidence
//!    interval of the mean runtime is narrower than a fraction λ of the mean
//!    ([`stopping::StoppingRule`]).
//!
//! Model quality is scored as SMAPE against a reference grid of true runtimes
//! ([`metrics::smape`]), and strategies are compared by win counts over many
//! seeded repetitions ([`session::run_benchmark`]).
//!
//! ## Examples directory — start here
//!
//! Each major capability has one runnable example:
//!
//! ```text
//! examples/
//! ├── fit_and_invert.rs      model: tier ladder, fitting, inversion
//! │                            cargo run --example fit_and_invert
//! ├── initial_limits.rs      selection: the initial parallel probe set
//! │                            cargo run --example initial_limits
//! ├── early_stopping.rs      stopping: t-CI early termination per probe
//! │                            cargo run --example early_stopping
//! ├── profile_synthetic.rs   session: one full profiling run, step by step
//! │                            cargo run --example profile_synthetic
//! ├── strategy_benchmark.rs  session/metrics: strategy shoot-out with win tallies
//! │                            cargo run --example strategy_benchmark
//! └── trace_roundtrip.rs     oracle: simulate → trace CSV → replay → refit
//!                              cargo run --example trace_roundtrip
//! ```
//!
//! A thin CLI binary (`limprof`) wraps the same library surface with
//! `profile`, `fit`, `bench`, and `simulate` subcommands; see [`cli`].
//!
//! ## Determinism
//!
//! Every random choice — synthetic noise, the random strategy, benchmark cell
//! seeds — flows from explicit integer seeds through ChaCha8 streams, so any
//! run (including whole benchmark reports) is bit-for-bit reproducible.

pub mod cli;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod selection;
pub mod session;
pub mod special;
pub mod stopping;

pub use metrics::{count_wins, smape, SmapeConfig};
pub use model::{fit, FitOutcome, Inversion, ProfilePoint, RuntimeModel};
pub use oracle::{
    load_trace, CommandOracle, JobOracle, ProbeOutcome, SyntheticOracle, TraceOracle,
};
pub use selection::{
    anchor_limit, initial_limits, synthetic_target, InitialSelection, LimitGrid, StrategyKind,
    StrategyState,
};
pub use session::{
    run_benchmark, run_session, BenchmarkReport, ProfilingConfig, SessionReport,
};
pub use stopping::{running_stats, RunningStats, StoppingRule};

/// splitmix64 finalizer: the bit mixer behind every derived seed in this crate.
///
/// Used to fan one master seed out into independent per-cell / per-sample
/// seeds without any stream sharing: `mix64` is bijective on u64 and its
/// output bits are well scrambled, so derived ChaCha8 generators never
/// correlate in practice.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed from `master` and a sequence of domain tags by folding each
/// tag through [`mix64`]. Same tags → same seed; any tag change → unrelated seed.
pub(crate) fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = mix64(master);
    for &t in tags {
        s = mix64(s ^ mix64(t));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix64_is_deterministic_and_spreads() {
        assert_eq!(mix64(0), mix64(0));
        assert_ne!(mix64(0), mix64(1));
        // Consecutive inputs should not produce consecutive outputs.
        assert!(mix64(1).abs_diff(mix64(2)) > 1 << 32);
    }

    #[test]
    fn derive_seed_separates_domains() {
        let m = 42;
        assert_ne!(derive_seed(m, &[0, 1]), derive_seed(m, &[1, 0]));
        assert_ne!(derive_seed(m, &[0]), derive_seed(m, &[0, 0]));
        assert_eq!(derive_seed(m, &[3, 7]), derive_seed(m, &[3, 7]));
    }
}
