//! Prints one period of clock inputs and gait clocks as CSV, then reports the
//! double-support share for a few stance fractions.
//!
//! Usage: `cargo run --example gait_clocks -- [samples] > clocks.csv`

use terrastride::gait::{clock_curve_csv, ClockShape};
use terrastride::state::Foot;

fn main() -> terrastride::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    print!("{}", clock_curve_csv(&ClockShape::default(), samples)?);
    for s in [0.55, 0.6, 0.7, 0.85] {
        let shape = ClockShape { stance_fraction: s, ..Default::default() };
        shape.validate()?;
        let n = 10_000;
        let both = (0..n)
            .map(|i| i as f64 / n as f64)
            .filter(|&phi| shape.in_stance(phi, Foot::Left) && shape.in_stance(phi, Foot::Right))
            .count();
        eprintln!("stance {s:.2}: double support {:.4} of the period", both as f64 / n as f64);
    }
    Ok(())
}
