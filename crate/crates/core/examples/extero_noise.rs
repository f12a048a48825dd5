//! Samples the height pattern around both feet on a hills field and renders
//! the clean and noisy point clouds under each noise mode.
//!
//! Usage: `cargo run --release --example extero_noise -- [out_dir]`

use std::path::PathBuf;

use terrastride::extero::{apply_noise, build_pattern, sample_clean, EpisodeNoise, NoiseMode, NoiseProfile};
use terrastride::state::Foot;
use terrastride::terrain::{generate, TerrainKind, TerrainSpec};

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/extero_noise".into()));
    std::fs::create_dir_all(&out)?;
    let mut field = generate(&TerrainSpec::random(TerrainKind::Hills, 3), (120, 120), 0.05, 1.0)?;
    field.origin = [-3.0, -3.0];
    let pattern = build_pattern();
    let yaw = 0.3;
    let left = sample_clean(&field, Foot::Left, [0.0, 0.12], yaw, &pattern);
    let right = sample_clean(&field, Foot::Right, [0.0, -0.12], yaw, &pattern);
    terrastride::extero::render_scatter(&[&left, &right], 80.0).save(out.join("clean.png"))?;

    for mode in [NoiseMode::Nominal, NoiseMode::Offset, NoiseMode::Noisy] {
        let profile = NoiseProfile::for_mode(mode, 11);
        let (el, er) = (EpisodeNoise::draw(&profile, 0, Foot::Left), EpisodeNoise::draw(&profile, 0, Foot::Right));
        let nl = apply_noise(&left, &field, &profile, &el, 0);
        let nr = apply_noise(&right, &field, &profile, &er, 0);
        let name = format!("{mode:?}").to_lowercase();
        terrastride::extero::render_scatter(&[&nl, &nr], 80.0).save(out.join(format!("{name}.png")))?;
        println!(
            "{name:<8} {} points per foot, rms error left {:.4} m right {:.4} m",
            pattern.len(),
            rms(&nl.heights, &left.heights),
            rms(&nr.heights, &right.heights)
        );
    }
    Ok(())
}
