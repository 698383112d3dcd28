//! One full profiling session, step by step.
//!
//! Profiles a simulated job end to end: parallel initial batch, synthetic
//! target from the anchor probe, sequential strategy probes, and a model
//! refit after every step. Because the oracle knows its own ground truth,
//! every intermediate model is also scored by SMAPE against the true curve.
//!
//! Run with: `cargo run --example profile_synthetic`

use anyhow::Result;
use limprof::{run_session, ProfilingConfig, RuntimeModel, SyntheticOracle};

fn main() -> Result<()> {
    let config = ProfilingConfig {
        max_steps: 8,
        seed: 7,
        ..ProfilingConfig::default()
    };
    let truth = RuntimeModel::tier4(2.0, 0.8, 0.3);
    let mut oracle = SyntheticOracle::new(truth, config.grid()?, 0.05, config.seed)?;
    let reference = oracle.reference();

    let report = run_session(&mut oracle, &config, Some(&reference))?;

    println!("strategy: {}", report.strategy);
    println!(
        "target: {:.4} s/sample (measured at the {} CPU anchor)\n",
        report.target_runtime, report.target_limit
    );

    println!("probes:");
    println!("{:>5} {:>8} {:>8} {:>12} {:>10} {:>12}",
        "step", "initial", "limit", "runtime", "samples", "duration_s");
    for p in &report.probes {
        println!(
            "{:>5} {:>8} {:>8} {:>12.4} {:>10} {:>12.1}",
            p.step, p.initial, p.cpu_limit, p.mean_runtime, p.n_samples, p.duration_seconds
        );
    }

    println!("\nmodel after each step:");
    println!("{:>5} {:>5} {:>10} {:>12} {:>12} {:>12}",
        "step", "tier", "smape", "recommends", "unreachable", "cum_time_s");
    for m in &report.models {
        println!(
            "{:>5} {:>5} {:>10.5} {:>12} {:>12} {:>12.1}",
            m.step,
            m.model.tier,
            m.smape_vs_reference.unwrap_or(f64::NAN),
            m.recommended_limit,
            m.target_unreachable,
            m.cumulative_time_seconds
        );
    }

    println!(
        "\nfinal recommendation: {} CPUs (true curve meets the target at {})",
        report.recommended_limit,
        truth.invert(report.target_runtime, &config.grid()?)?.limit
    );
    println!("total simulated profiling time: {:.1} s", report.total_time_seconds);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
