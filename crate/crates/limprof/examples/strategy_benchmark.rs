//! Strategy shoot-out: which probe-selection rule learns the curve fastest?
//!
//! Crosses all four strategies over many seeded repetitions of the same
//! noisy job. Every repetition gives each strategy an identical noise
//! stream (the oracle seed ignores the strategy), so differences in SMAPE
//! are attributable to the probe choices alone. Wins are counted per
//! (repetition, step): a strategy wins strictly (lowest SMAPE) or within
//! 10% of the best.
//!
//! Run with: `cargo run --example strategy_benchmark --release`

use anyhow::Result;
use limprof::{
    run_benchmark, JobOracle, ProfilingConfig, RuntimeModel, StoppingRule, StrategyKind,
    SyntheticOracle,
};

fn main() -> Result<()> {
    let config = ProfilingConfig {
        max_steps: 8,
        stopping: StoppingRule { max_samples: 200, ..StoppingRule::default() },
        ..ProfilingConfig::default()
    };
    let strategies = StrategyKind::ALL;
    let repetitions = 30;
    let truth = RuntimeModel::tier4(2.0, 0.8, 0.3);
    let sigma = 0.05;

    let factory = move |_ci: usize, cell: &ProfilingConfig, oracle_seed: u64| {
        let oracle = SyntheticOracle::new(truth, cell.grid()?, sigma, oracle_seed)?;
        let reference = oracle.reference();
        Ok((Box::new(oracle) as Box<dyn JobOracle>, Some(reference)))
    };
    let report = run_benchmark(
        std::slice::from_ref(&config),
        &strategies,
        repetitions,
        2024,
        &factory,
    )?;

    // Median SMAPE per (strategy, step): how fast does each strategy's
    // model converge to the true curve as the probe budget grows?
    println!("median SMAPE vs true curve ({repetitions} repetitions, noise σ = {sigma}):\n");
    print!("{:>6}", "step");
    for s in &strategies {
        print!(" {:>14}", s.name());
    }
    println!();
    for step in config.n_initial + 1..=config.max_steps {
        print!("{step:>6}");
        for &strategy in &strategies {
            let mut scores: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.strategy == strategy && r.step == step)
                .filter_map(|r| r.smape)
                .collect();
            print!(" {:>14.5}", median(&mut scores));
        }
        println!();
    }

    println!("\nwins (per repetition × step):");
    println!("{:>14} {:>8} {:>10}", "strategy", "strict", "within_10%");
    for w in &report.wins {
        println!("{:>14} {:>8} {:>10}", w.strategy.name(), w.wins_0, w.wins_10);
    }
    if !report.failures.is_empty() {
        println!("\n{} cells failed:", report.failures.len());
        for f in &report.failures {
            println!("  {f}");
        }
    }
    Ok(())
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}
