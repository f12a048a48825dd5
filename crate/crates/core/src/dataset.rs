//! Builds student training sequences from synthetic walks.
//!
//! Each episode draws a terrain, a curriculum factor and a velocity command,
//! flattens a spawn pad around the start so the first samples are of known
//! height, rolls a walk, and records proprioception with clean and noisy
//! samples under one noise mode. Episode `i` is fully determined by
//! `(seed, i)`, so the same episode can be rebuilt under another noise mode.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Dataset, Profile, Sequence, TeacherPolicy};
use crate::commands::{sample_command, schedule_resample, CommandDistribution};
use crate::error::{Error, Result};
use crate::extero::{apply_noise, sample_clean, EpisodeNoise, NoiseMode, NoiseProfile, SamplePattern};
use crate::rng::{derive_seed, rng_from};
use crate::state::Foot;
use crate::synthwalker::{roll_trajectory, CommandChange, WalkSpec, WalkStep, MAX_STEPS};
use crate::terrain::{generate_at, HeightField, TerrainKind, TerrainSpec, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub profile: Profile,
    pub episodes: usize,
    pub heldout_episodes: usize,
    pub steps: usize,
    /// Relative weights of the noise modes across episodes.
    pub noise_mix: Vec<(NoiseMode, f64)>,
    pub terrain_kinds: Vec<TerrainKind>,
    pub c_t_range: [f64; 2],
    /// Side of the square terrain patch (m), centred on the start.
    pub terrain_size: f64,
    pub resolution: f64,
    pub spawn_pad_radius: f64,
    pub commands: CommandDistribution,
    pub resample_command: bool,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Desk,
            episodes: 40,
            heldout_episodes: 8,
            steps: MAX_STEPS,
            noise_mix: vec![(NoiseMode::Offset, 1.0)],
            terrain_kinds: TerrainKind::TRAINING.to_vec(),
            c_t_range: [0.25, 1.0],
            terrain_size: 18.0,
            resolution: DEFAULT_RESOLUTION,
            spawn_pad_radius: 1.2,
            commands: CommandDistribution::default(),
            resample_command: true,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.heldout_episodes == 0 {
            return Err(Error::invalid("episodes", "need at least one training and one held-out episode"));
        }
        if self.steps == 0 || self.steps > MAX_STEPS {
            return Err(Error::invalid("steps", format!("must lie in [1, {MAX_STEPS}]")));
        }
        if self.noise_mix.is_empty() || self.noise_mix.iter().any(|(_, w)| !(*w > 0.0)) {
            return Err(Error::invalid("noise_mix", "need positive weights"));
        }
        if self.terrain_kinds.is_empty() {
            return Err(Error::invalid("terrain_kinds", "need at least one kind"));
        }
        let [lo, hi] = self.c_t_range;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(Error::invalid("c_t_range", "need 0 <= low <= high <= 1"));
        }
        if !(self.terrain_size > 2.0 * self.spawn_pad_radius && self.resolution > 0.0) {
            return Err(Error::invalid("terrain_size", "patch must be larger than the spawn pad"));
        }
        Ok(())
    }

    pub fn pattern(&self) -> SamplePattern {
        self.profile.pattern()
    }
}

/// What an episode was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub index: u64,
    pub terrain: TerrainSpec,
    pub c_t: f64,
    pub noise: NoiseMode,
    pub walk: WalkSpec,
    pub truncated: bool,
}

/// Terrain and walk of episode `index`, before any sampling.
pub fn episode_world(config: &DatasetConfig, index: u64) -> Result<(HeightField, WalkSpec, TerrainSpec, f64)> {
    let mut rng = rng_from(&[config.seed, index, 0xE915]);
    let kind = config.terrain_kinds[rng.random_range(0..config.terrain_kinds.len())];
    let terrain = TerrainSpec::random(kind, derive_seed(&[config.seed, index, 0x7E44]));
    let [lo, hi] = config.c_t_range;
    let c_t = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let cells = (config.terrain_size / config.resolution).round() as usize;
    let half = 0.5 * config.terrain_size;
    let mut field = generate_at(&terrain, (cells, cells), config.resolution, [-half, -half], c_t)?;
    field.flatten_disk([0.0, 0.0], config.spawn_pad_radius);

    let command = sample_command(&config.commands, &mut rng);
    let command_change = if config.resample_command {
        schedule_resample(config.steps, &mut rng).map(|step| CommandChange {
            step,
            command: sample_command(&config.commands, &mut rng),
        })
    } else {
        None
    };
    let walk = WalkSpec {
        command,
        command_change,
        start_yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        steps: config.steps,
        seed: derive_seed(&[config.seed, index, 0x3A1C]),
        ..Default::default()
    };
    Ok((field, walk, terrain, c_t))
}

pub fn noise_mode_for(config: &DatasetConfig, index: u64) -> NoiseMode {
    let total: f64 = config.noise_mix.iter().map(|(_, w)| w).sum();
    let u: f64 = rng_from(&[config.seed, index, 0x4015E]).random::<f64>() * total;
    let mut acc = 0.0;
    for (mode, w) in &config.noise_mix {
        acc += w;
        if u < acc {
            return *mode;
        }
    }
    config.noise_mix.last().unwrap().0
}

/// Clean and noisy samples of both feet for every walk step, flattened as
/// `[left, right]` per step.
pub fn sample_steps(
    steps: &[WalkStep],
    field: &HeightField,
    pattern: &SamplePattern,
    profile: &NoiseProfile,
    episode: u64,
) -> (Vec<f64>, Vec<f64>) {
    let noise = Foot::BOTH.map(|f| EpisodeNoise::draw(profile, episode, f));
    let mut clean = Vec::with_capacity(steps.len() * 2 * pattern.len());
    let mut noisy = Vec::with_capacity(clean.capacity());
    for (t, step) in steps.iter().enumerate() {
        for foot in Foot::BOTH {
            let xy = step.state.foot_positions[foot.index()];
            let c = sample_clean(field, foot, xy, step.state.pelvis_yaw, pattern);
            let n = apply_noise(&c, field, profile, &noise[foot.index()], t as u64);
            clean.extend_from_slice(&c.heights);
            noisy.extend_from_slice(&n.heights);
        }
    }
    (clean, noisy)
}

/// Builds episode `index` under `mode`, labelling it with `teacher` when given.
pub fn build_episode(
    config: &DatasetConfig,
    index: u64,
    mode: NoiseMode,
    teacher: Option<&TeacherPolicy>,
) -> Result<(Sequence, EpisodeInfo)> {
    let profile = NoiseProfile::for_mode(mode, derive_seed(&[config.seed, 0x401]));
    build_episode_with(config, index, &profile, teacher)
}

/// As [`build_episode`] with an explicit noise profile.
pub fn build_episode_with(
    config: &DatasetConfig,
    index: u64,
    profile: &NoiseProfile,
    teacher: Option<&TeacherPolicy>,
) -> Result<(Sequence, EpisodeInfo)> {
    let (field, walk, terrain, c_t) = episode_world(config, index)?;
    let traj = roll_trajectory(&walk, &field)?;
    if traj.steps.is_empty() {
        return Err(Error::invalid("episode", format!("episode {index} left the terrain immediately")));
    }
    let pattern = config.pattern();
    let (clean, noisy) = sample_steps(&traj.steps, &field, &pattern, profile, index);
    let mut proprio = Vec::with_capacity(traj.steps.len() * crate::state::PROPRIO_DIM);
    for s in &traj.steps {
        proprio.extend_from_slice(&s.proprio.flatten()?);
    }
    let mut seq = Sequence {
        pattern_points: pattern.len(),
        proprio,
        noisy,
        clean,
        teacher_actions: Vec::new(),
    };
    if let Some(t) = teacher {
        seq.label_with(t)?;
    }
    let info = EpisodeInfo {
        index,
        terrain,
        c_t,
        noise: profile.mode,
        walk,
        truncated: traj.truncated,
    };
    Ok((seq, info))
}

/// Training episodes `0..episodes` and held-out episodes after them.
pub fn build_dataset(config: &DatasetConfig, teacher: Option<&TeacherPolicy>) -> Result<(Dataset, Vec<EpisodeInfo>)> {
    config.validate()?;
    let n = (config.episodes + config.heldout_episodes) as u64;
    let built: Vec<(Sequence, EpisodeInfo)> = (0..n)
        .into_par_iter()
        .map(|i| build_episode(config, i, noise_mode_for(config, i), teacher))
        .collect::<Result<_>>()?;
    let mut dataset = Dataset::default();
    let mut infos = Vec::with_capacity(built.len());
    for (i, (seq, info)) in built.into_iter().enumerate() {
        if i < config.episodes {
            dataset.train.push(seq);
        } else {
            dataset.heldout.push(seq);
        }
        infos.push(info);
    }
    Ok((dataset, infos))
}

/// The held-out episodes rebuilt under a single noise mode.
pub fn heldout_under(config: &DatasetConfig, mode: NoiseMode, teacher: Option<&TeacherPolicy>) -> Result<Vec<Sequence>> {
    let start = config.episodes as u64;
    (start..start + config.heldout_episodes as u64)
        .into_par_iter()
        .map(|i| build_episode(config, i, mode, teacher).map(|(s, _)| s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig {
            episodes: 2,
            heldout_episodes: 1,
            steps: 40,
            ..Default::default()
        }
    }

    #[test]
    fn episodes_are_reproducible() {
        let c = small();
        let (a, _) = build_episode(&c, 1, NoiseMode::Offset, None).unwrap();
        let (b, _) = build_episode(&c, 1, NoiseMode::Offset, None).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn modes_share_world_and_clean_samples() {
        let c = small();
        let (a, _) = build_episode(&c, 0, NoiseMode::Nominal, None).unwrap();
        let (b, _) = build_episode(&c, 0, NoiseMode::Noisy, None).unwrap();
        assert_eq!(a.clean, b.clean);
        assert_eq!(a.proprio, b.proprio);
        assert_ne!(a.noisy, b.noisy);
    }

    #[test]
    fn spawn_pad_is_flat() {
        let c = small();
        let (seq, _) = build_episode(&c, 0, NoiseMode::Offset, None).unwrap();
        let centre = seq.clean(0)[0];
        assert_eq!(centre, 0.0);
    }

    #[test]
    fn dataset_split() {
        let (d, infos) = build_dataset(&small(), None).unwrap();
        assert_eq!((d.train.len(), d.heldout.len(), infos.len()), (2, 1, 3));
    }
}
