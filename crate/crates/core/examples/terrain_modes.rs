//! Generates one field per training mode and writes each as a PGM image.
//!
//! Usage: `cargo run --release --example terrain_modes -- [out_dir] [seed]`

use std::path::PathBuf;

use terrastride::terrain::{generate, TerrainKind, TerrainSpec};

fn main() -> terrastride::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/terrain_modes".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    std::fs::create_dir_all(&out)?;
    for kind in TerrainKind::TRAINING {
        let spec = TerrainSpec::random(kind, seed);
        let field = generate(&spec, (200, 200), 0.05, 1.0)?;
        let (lo, hi) = field.min_max();
        let path = out.join(format!("{}.pgm", kind.name()));
        field.write_pgm(&path)?;
        println!(
            "{:<15} min {lo:.3} max {hi:.3} levels {:>4}  {}",
            kind.name(),
            field.distinct_levels(1e-3).len(),
            path.display()
        );
    }
    Ok(())
}
