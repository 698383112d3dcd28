//! The tiered runtime model: fitting and inversion.
//!
//! Walks the model ladder — with 1 point the model is the fixed curve R⁻¹,
//! with 5+ points it is the full a·(R·d)⁻ᵇ + c — fitting each tier to
//! measurements drawn from a known ground truth, then inverts the final
//! model to find the smallest CPU limit meeting a runtime target.
//!
//! Run with: `cargo run --example fit_and_invert`

use anyhow::Result;
use limprof::model::select_tier;
use limprof::{fit, LimitGrid, ProfilePoint, RuntimeModel};

fn main() -> Result<()> {
    // Ground truth the example pretends not to know: a job that needs
    // ~3 s per sample at 1 CPU, scales sublinearly (b = 0.9), and carries
    // a 0.1 s floor no amount of CPU removes.
    let truth = RuntimeModel::tier5(3.0, 0.9, 0.1, 1.0);
    let limits = [0.2, 0.5, 1.0, 2.0, 4.0, 8.0];

    println!("ground truth: {truth:?}\n");
    println!("{:>8} {:>12}", "limit", "runtime");
    let mut points = Vec::new();
    for &limit in &limits {
        let runtime = truth.eval(limit)?;
        println!("{limit:>8} {runtime:>12.6}");
        points.push(ProfilePoint::summary(limit, runtime)?);
    }

    // The model ladder: each prefix of the data selects its own tier.
    println!("\n{:>7} {:>5} {:>10} {:>10} {:>10} {:>10} {:>12}",
        "points", "tier", "a", "b", "c", "d", "residual");
    for n in 1..=points.len() {
        let outcome = fit(&points[..n], None)?;
        let m = outcome.model;
        assert_eq!(m.tier, select_tier(n)?);
        println!(
            "{n:>7} {:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>12.3e}",
            m.tier, m.a, m.b, m.c, m.d, outcome.residual_norm
        );
    }

    // Inversion: the smallest grid limit whose predicted runtime meets the
    // target. Targets below the floor c are unreachable and saturate at the
    // grid maximum.
    let fitted = fit(&points, None)?.model;
    let grid = LimitGrid::new(0.1, 8.0, 0.1)?;
    println!("\n{:>10} {:>12} {:>14}", "target", "limit", "unreachable");
    for target in [5.0, 2.0, 1.0, 0.5, 0.105] {
        let inv = fitted.invert(target, &grid)?;
        println!("{target:>10} {:>12} {:>14}", inv.limit, inv.target_unreachable);
    }

    // The fit recovers the *curve* even when individual parameters are not
    // identifiable (a and d trade off exactly).
    let worst: f64 = limits
        .iter()
        .map(|&l| {
            let t = truth.eval(l).unwrap();
            (fitted.eval(l).unwrap() - t).abs() / t
        })
        .fold(0.0, f64::max);
    println!("\nworst relative prediction error on the probed limits: {worst:.2e}");
    Ok(())
}
