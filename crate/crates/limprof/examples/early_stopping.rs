//! Per-probe early stopping with a Student-t confidence interval.
//!
//! A probe streams per-sample runtimes and must decide when the mean is
//! known well enough. The rule stops as soon as the two-sided t confidence
//! interval of the mean is narrower than λ times the mean itself — tighter
//! λ means more samples. This example replays one noisy stream against
//! several rules and shows where each one stops.
//!
//! Run with: `cargo run --example early_stopping`

use anyhow::Result;
use limprof::{RunningStats, StoppingRule, SyntheticOracle};
use limprof::{LimitGrid, RuntimeModel};

fn main() -> Result<()> {
    // One noisy runtime stream, materialized once so every rule sees the
    // exact same samples (lognormal noise, σ = 0.2, around a 1.495 s mean).
    let truth = RuntimeModel::tier5(3.0, 0.9, 0.1, 1.0);
    let grid = LimitGrid::new(0.5, 2.0, 0.5)?;
    let mut source = SyntheticOracle::new(truth, grid, 0.2, 42)?;
    let stream: Vec<f64> = source.draw_series(10_000).swap_remove(1);
    println!("stream mean over {} samples: {:.6}\n", stream.len(), mean(&stream));

    println!("{:>8} {:>10} {:>12} {:>12} {:>10}",
        "lambda", "stopped_at", "mean", "ci_width", "cost_%");
    for lambda in [0.20, 0.10, 0.05, 0.02] {
        let rule = StoppingRule { lambda, ..StoppingRule::default() };
        let mut stats = RunningStats::new();
        for &sample in &stream {
            stats.push(sample);
            if rule.should_stop(&stats)? {
                break;
            }
        }
        println!(
            "{lambda:>8} {:>10} {:>12.6} {:>12.6} {:>10.2}",
            stats.count(),
            stats.mean(),
            rule.ci_width(&stats)?,
            100.0 * stats.count() as f64 / stream.len() as f64,
        );
    }

    // The same interval math, standalone: width = 2·t·√(s²/n). With 31
    // samples the t quantile is ~2.04, noticeably wider than the normal
    // approximation — exactly why small probes need t, not z.
    let rule = StoppingRule::default();
    let mut stats = RunningStats::new();
    for &sample in &stream[..31] {
        stats.push(sample);
    }
    println!(
        "\nafter 31 samples: mean {:.4}, sample variance {:.4}, 95% CI width {:.4}",
        stats.mean(),
        stats.sample_variance(),
        rule.ci_width(&stats)?
    );
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
