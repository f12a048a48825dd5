//! Trains the belief encoder/decoder as a denoiser on offset-mode walks and
//! compares held-out reconstruction error with the raw noisy samples.
//!
//! Usage: `cargo run --release --example denoise -- [episodes] [epochs] [checkpoint]`

use std::time::Instant;

use terrastride::belief::{evaluate, train_student, LossWeights, StudentTrainConfig};
use terrastride::dataset::{build_dataset, heldout_under, DatasetConfig};
use terrastride::extero::NoiseMode;
use terrastride::nn::checkpoint;

fn main() -> terrastride::Result<()> {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let episodes = raw.first().and_then(|a| a.parse().ok()).unwrap_or(120);
    let epochs = raw.get(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let checkpoint = raw.get(2).cloned();

    let data_config = DatasetConfig {
        episodes,
        heldout_episodes: 16,
        noise_mix: vec![(NoiseMode::Offset, 1.0)],
        ..Default::default()
    };
    let t = Instant::now();
    let (dataset, _) = build_dataset(&data_config, None)?;
    println!("dataset {:?} steps in {:.1?}", dataset.steps(), t.elapsed());

    let loss = LossWeights { imitation: 0.0, reconstruction: 1.0, gate: 0.0 };
    let config = StudentTrainConfig { epochs, loss, ..Default::default() };
    let t = Instant::now();
    let out = train_student(&dataset, &config)?;
    for m in &out.history {
        println!(
            "epoch {:3} train {:.5} heldout rec {:.5} noisy {:.5} ratio {:.3}",
            m.epoch,
            m.train_loss,
            m.heldout.reconstruction_mse,
            m.heldout.noisy_mse,
            m.heldout.reconstruction_mse / m.heldout.noisy_mse,
        );
    }
    println!("trained in {:.1?}, best epoch {}", t.elapsed(), out.best_epoch);

    for mode in [NoiseMode::Nominal, NoiseMode::Offset, NoiseMode::Noisy] {
        let seqs = heldout_under(&data_config, mode, None)?;
        let m = evaluate(&out.best, &seqs, &loss)?;
        println!(
            "{mode:?}: rec {:.5} noisy {:.5} ratio {:.3} gate {:.4}",
            m.reconstruction_mse,
            m.noisy_mse,
            m.reconstruction_mse / m.noisy_mse,
            m.mean_gate
        );
    }
    if let Some(path) = checkpoint {
        checkpoint::save(std::path::Path::new(&path), &out.best, serde_json::json!({ "best_epoch": out.best_epoch }))?;
        println!("saved {path}");
    }
    Ok(())
}
