//! The initial parallel probe set.
//!
//! Before any model exists, a session probes a few limits at once. The set
//! is built so that (1) the anchor limit l_p = snap(max(0.2, l_max·p)) sits
//! deep in the curved low-CPU region, (2) the remaining limits spread over
//! the rest of the grid, and (3) the limits sum to at most l_max, so all
//! probes genuinely fit one machine concurrently.
//!
//! Run with: `cargo run --example initial_limits`

use anyhow::Result;
use limprof::{anchor_limit, initial_limits, LimitGrid};

fn main() -> Result<()> {
    let fraction = 0.05;

    println!("anchor fraction p = {fraction}\n");
    println!("{:>6} {:>6} {:>8} {:<26} {:>8} {:>8}",
        "l_max", "n", "anchor", "initial limits", "sum", "budget");
    for l_max in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let grid = LimitGrid::new(0.1, l_max, 0.1)?;
        let anchor = anchor_limit(&grid, fraction)?;
        for n in [2, 3, 4] {
            match initial_limits(&grid, n, fraction) {
                Ok(selection) => {
                    let sum: f64 = selection.limits.iter().sum();
                    println!(
                        "{l_max:>6} {n:>6} {anchor:>8} {:<26} {sum:>8.1} {l_max:>8}",
                        format!("{:?}", selection.limits)
                    );
                    for w in &selection.warnings {
                        println!("{:>13} warning: {w}", "");
                    }
                }
                Err(e) => {
                    println!("{l_max:>6} {n:>6} {anchor:>8} infeasible: {e}");
                }
            }
        }
    }

    // The anchor never sinks below 0.2 CPUs: tiny fractions of a small grid
    // would otherwise probe limits so starved that one sample takes forever.
    println!("\nanchor floor on a small grid:");
    let small = LimitGrid::new(0.1, 2.0, 0.1)?;
    for p in [0.025, 0.05, 0.1, 0.15] {
        println!("  p = {p:<6} -> anchor {}", anchor_limit(&small, p)?);
    }
    Ok(())
}
