//! Checks backpropagation through the desk-sized student against central
//! differences on random data.
//!
//! Usage: `cargo run --release --example gradient_check -- [steps] [stride]`

use rand::Rng;
use terrastride::belief::{sequence_loss, ArchConfig, LossWeights, Sequence, StudentPolicy};
use terrastride::nn::gradcheck::{check_gradients, STEP};
use terrastride::nn::Parameters;
use terrastride::rng::rng_from;
use terrastride::state::{ACTION_DIM, PROPRIO_DIM};

fn main() -> terrastride::Result<()> {
    let mut args = std::env::args().skip(1).filter_map(|a| a.parse::<usize>().ok());
    let len = args.next().unwrap_or(10);
    let stride = args.next().unwrap_or(7);
    let arch = ArchConfig::desk();
    let mut rng = rng_from(&[4]);
    let p2 = 2 * arch.pattern_points;
    let mut uniform = |n: usize, lo: f64, hi: f64| (0..n).map(|_| rng.random_range(lo..hi)).collect::<Vec<_>>();
    let seq = Sequence {
        pattern_points: arch.pattern_points,
        proprio: uniform(len * PROPRIO_DIM, -1.0, 1.0),
        noisy: uniform(len * p2, 0.0, 0.6),
        clean: uniform(len * p2, 0.0, 0.6),
        teacher_actions: uniform(len * ACTION_DIM, -0.5, 0.5),
    };
    let policy = StudentPolicy::seeded(&arch, 3)?;
    let w = LossWeights::default();
    let loss = |p: &StudentPolicy| sequence_loss(p, &seq, &w, 1.0 / len as f64, None).map(|l| l.total(&w)).unwrap_or(f64::NAN);
    let mut grad = policy.zeros_like();
    sequence_loss(&policy, &seq, &w, 1.0 / len as f64, Some(&mut grad))?;
    let report = check_gradients(&policy, &grad, loss, STEP, stride);
    println!(
        "{} parameters, every {stride}th checked: max relative error {:.2e} at {}[{}] (analytic {:.3e}, numeric {:.3e})",
        policy.param_count(),
        report.max_relative_error,
        report.worst_parameter,
        report.worst_index,
        report.analytic_at_worst,
        report.numeric_at_worst
    );
    Ok(())
}
