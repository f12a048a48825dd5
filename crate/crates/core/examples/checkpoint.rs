//! Saves a freshly initialized student, reloads it into a differently seeded
//! one and confirms both produce the same action.

use terrastride::belief::{ArchConfig, StudentPolicy};
use terrastride::nn::checkpoint;
use terrastride::state::PROPRIO_DIM;

fn main() -> terrastride::Result<()> {
    let arch = ArchConfig::desk();
    let original = StudentPolicy::seeded(&arch, 1)?;
    let dir = std::env::temp_dir().join("terrastride-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("student.ckpt");
    let manifest = checkpoint::save(&path, &original, serde_json::json!({ "note": "example" }))?;
    println!("saved {} ({} parameters, sha256 {})", path.display(), manifest.parameter_count, manifest.sha256);

    let mut restored = StudentPolicy::seeded(&arch, 2)?;
    checkpoint::load(&path, &mut restored)?;
    let o_p = vec![0.1; PROPRIO_DIM];
    let n = vec![0.2; arch.pattern_points];
    let a = original.forward(&o_p, &n, &n, &mut original.initial_state())?;
    let b = restored.forward(&o_p, &n, &n, &mut restored.initial_state())?;
    println!("actions match: {}", a.action == b.action);
    Ok(())
}
