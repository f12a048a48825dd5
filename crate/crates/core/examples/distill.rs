//! Distils a frozen synthetic teacher into the student on nominal-noise walks
//! and reports held-out imitation error relative to its value at initialization.
//!
//! Usage: `cargo run --release --example distill -- [episodes] [epochs]`

use std::time::Instant;

use terrastride::belief::{make_synthetic_teacher, train_student, StudentTrainConfig};
use terrastride::dataset::{build_dataset, DatasetConfig};
use terrastride::extero::NoiseMode;

fn main() -> terrastride::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let episodes = args.first().copied().unwrap_or(60);
    let epochs = args.get(1).copied().unwrap_or(30);
    let config = StudentTrainConfig { epochs, ..Default::default() };
    let teacher = make_synthetic_teacher(&config.arch, 7)?;
    let data = DatasetConfig {
        episodes,
        heldout_episodes: 8,
        noise_mix: vec![(NoiseMode::Nominal, 1.0)],
        ..Default::default()
    };
    let t = Instant::now();
    let (dataset, _) = build_dataset(&data, Some(&teacher))?;
    println!("dataset {:?} steps in {:.1?}", dataset.steps(), t.elapsed());

    let t = Instant::now();
    let out = train_student(&dataset, &config)?;
    let initial = out.initial.imitation_mse;
    println!("initial held-out imitation mse {initial:.5}");
    for m in &out.history {
        println!(
            "epoch {:3} train {:.5} imitation {:.5} ({:.3} of initial) reconstruction {:.5}",
            m.epoch,
            m.train_loss,
            m.heldout.imitation_mse,
            m.heldout.imitation_mse / initial,
            m.heldout.reconstruction_mse
        );
    }
    let first = out.history.iter().find(|m| m.heldout.imitation_mse <= 0.1 * initial);
    match first {
        Some(m) => println!("reached 10% of initial at epoch {} in {:.1?}", m.epoch, t.elapsed()),
        None => println!("did not reach 10% of initial within {epochs} epochs ({:.1?})", t.elapsed()),
    }
    Ok(())
}
