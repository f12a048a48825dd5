//! Draws velocity commands from the default table and compares empirical row
//! frequencies with their probabilities.
//!
//! Usage: `cargo run --release --example command_sampler -- [draws] [seed]`

use terrastride::commands::{schedule_resample, CommandDistribution};
use terrastride::rng::rng_from;

fn main() {
    let mut args = std::env::args().skip(1).filter_map(|a| a.parse::<u64>().ok());
    let draws = args.next().unwrap_or(100_000) as usize;
    let seed = args.next().unwrap_or(0);
    let dist = CommandDistribution::default();
    let mut rng = rng_from(&[seed]);
    let mut counts = vec![0usize; dist.rows().len()];
    for _ in 0..draws {
        counts[dist.sample_with_row(&mut rng).0] += 1;
    }
    for (i, (row, p)) in dist.rows().iter().zip(dist.probabilities()).enumerate() {
        let f = counts[i] as f64 / draws as f64;
        println!("row {i:2} p {p:.4} observed {f:.4}  {row:?}");
    }
    let steps: Vec<usize> = (0..5).filter_map(|_| schedule_resample(300, &mut rng)).collect();
    println!("mid-episode resample steps for five 300-step episodes: {steps:?}");
}
