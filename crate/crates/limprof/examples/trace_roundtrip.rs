//! Simulate → trace CSV → replay → refit.
//!
//! A trace file (`cpu_limit,sample_index,runtime_seconds`) decouples
//! measurement from analysis: record a job once, then replay it through as
//! many profiling sessions as you like, deterministically. This example
//! materializes a noisy synthetic job into a trace, loads it back (the
//! limit grid is inferred from the file), replays a full session, and
//! checks the refitted model against the original ground truth.
//!
//! Run with: `cargo run --example trace_roundtrip`

use anyhow::Result;
use limprof::oracle::write_trace;
use limprof::{
    load_trace, run_session, JobOracle, LimitGrid, ProfilingConfig, RuntimeModel, SyntheticOracle,
};

fn main() -> Result<()> {
    let truth = RuntimeModel::tier4(2.0, 0.8, 0.3);
    let grid = LimitGrid::new(0.1, 4.0, 0.1)?;

    // Record: 600 noisy samples at every grid limit.
    let mut source = SyntheticOracle::new(truth, grid, 0.05, 99)?;
    let series = source.draw_series(600);
    let path = std::env::temp_dir().join("limprof_roundtrip_trace.csv");
    write_trace(std::io::BufWriter::new(std::fs::File::create(&path)?), &grid, &series)?;
    let bytes = std::fs::metadata(&path)?.len();
    println!("wrote {} samples ({bytes} bytes) to {}", 600 * grid.len(), path.display());

    // Replay: the oracle reconstructs the grid purely from the file.
    let trace = load_trace(&path)?;
    assert_eq!(trace.grid(), grid);
    println!(
        "loaded trace: {} limits from {} to {}",
        trace.grid().len(),
        trace.grid().l_min(),
        trace.grid().l_max()
    );

    let config = ProfilingConfig {
        strategy: limprof::StrategyKind::Nms,
        max_steps: 8,
        stopping: limprof::StoppingRule { max_samples: 200, ..Default::default() },
        seed: 1,
        ..ProfilingConfig::default()
    };
    // The recorded per-limit means stand in for ground truth when scoring.
    let reference = trace.series_means();
    let mut oracle = trace;
    let report = run_session(&mut oracle, &config, Some(&reference))?;

    let last = report.models.last().expect("at least one model");
    println!(
        "\nsession used {} probes, final model tier {} (SMAPE vs recorded means: {:.5})",
        report.probes.len(),
        last.model.tier,
        last.smape_vs_reference.unwrap_or(f64::NAN),
    );

    // The model fitted off the replayed trace still tracks the *original*
    // generator closely at every grid limit.
    let worst: f64 = grid
        .limits()
        .iter()
        .map(|&l| {
            let t = truth.eval(l).unwrap();
            (last.model.eval(l).unwrap() - t).abs() / t
        })
        .fold(0.0, f64::max);
    println!("worst relative error vs the original ground truth: {worst:.4}");

    std::fs::remove_file(&path).ok();
    Ok(())
}
