//! Foot-centred terrain height sampling and the exteroceptive noise model.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::rng::rng_from;
use crate::state::Foot;
use crate::terrain::HeightField;

/// Ring layout `(radius m, point count)` of the full 318-point pattern.
pub const FULL_RINGS: [(f64, usize); 6] = [
    (0.08, 12),
    (0.16, 24),
    (0.26, 42),
    (0.38, 60),
    (0.55, 84),
    (0.80, 96),
];

/// Reduced 66-point layout used by the desk-scale training profile.
pub const DESK_RINGS: [(f64, usize); 4] = [(0.12, 6), (0.28, 12), (0.5, 18), (0.8, 30)];

pub const FULL_PATTERN_POINTS: usize = 318;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePattern {
    /// Foot-frame xy offsets in metres, sorted by radius then angle.
    pub offsets: Vec<[f64; 2]>,
}

impl SamplePattern {
    /// The full pattern: 318 points on six concentric rings out to 0.8 m.
    pub fn full() -> Self {
        Self::from_rings(&FULL_RINGS).expect("built-in ring layout is valid")
    }

    pub fn desk() -> Self {
        Self::from_rings(&DESK_RINGS).expect("built-in ring layout is valid")
    }

    /// Concentric rings of evenly spaced points. Odd-numbered rings are rotated
    /// by half a spacing. Every count must be even so the pattern is mirror
    /// symmetric about both axes.
    pub fn from_rings(rings: &[(f64, usize)]) -> Result<Self> {
        let mut offsets = Vec::new();
        for (ring, &(radius, count)) in rings.iter().enumerate() {
            if !(radius > 0.0) || count == 0 || count % 2 != 0 {
                return Err(Error::invalid(
                    "rings",
                    format!("ring {ring}: radius must be positive and count even and non-zero"),
                ));
            }
            let stagger = if ring % 2 == 1 { 0.5 } else { 0.0 };
            for k in 0..count {
                let a = 2.0 * PI * (k as f64 + stagger) / count as f64;
                offsets.push([radius * a.cos(), radius * a.sin()]);
            }
        }
        offsets.sort_by(|a, b| {
            let ra = a[0].hypot(a[1]);
            let rb = b[0].hypot(b[1]);
            ra.total_cmp(&rb)
                .then(a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])))
        });
        Ok(Self { offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.offsets.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
    }
}

/// The 318-point sampling pattern.
pub fn build_pattern() -> SamplePattern {
    SamplePattern::full()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteroSample {
    pub foot: Foot,
    pub heights: Vec<f64>,
    pub world_points: Vec<[f64; 2]>,
}

/// Pattern points centred at the foot and rotated by the pelvis yaw.
pub fn pattern_points(foot_xy: [f64; 2], pelvis_yaw: f64, pattern: &SamplePattern) -> Vec<[f64; 2]> {
    let (s, c) = pelvis_yaw.sin_cos();
    pattern
        .offsets
        .iter()
        .map(|&[dx, dy]| [foot_xy[0] + c * dx - s * dy, foot_xy[1] + s * dx + c * dy])
        .collect()
}

pub fn sample_clean(
    field: &HeightField,
    foot: Foot,
    foot_xy: [f64; 2],
    pelvis_yaw: f64,
    pattern: &SamplePattern,
) -> ExteroSample {
    let world_points = pattern_points(foot_xy, pelvis_yaw, pattern);
    let heights = world_points.iter().map(|&[x, y]| field.height_at(x, y)).collect();
    ExteroSample {
        foot,
        heights,
        world_points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Nominal,
    Offset,
    Noisy,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(NoiseMode::Nominal),
            "offset" => Ok(NoiseMode::Offset),
            "noisy" => Ok(NoiseMode::Noisy),
            other => Err(Error::invalid("noise mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub mode: NoiseMode,
    pub sigma_xy_step: f64,
    pub sigma_z_step: f64,
    pub sigma_xy_episode: f64,
    pub sigma_z_episode_per_foot: f64,
    /// Extra per-foot episode offset of the offset mode.
    pub sigma_z_offset_episode: f64,
    pub outlier_prob: f64,
    pub outlier_range: (f64, f64),
    pub seed: u64,
}

impl NoiseProfile {
    pub fn nominal(seed: u64) -> Self {
        Self {
            mode: NoiseMode::Nominal,
            sigma_xy_step: 0.01,
            sigma_z_step: 0.02,
            sigma_xy_episode: 0.02,
            sigma_z_episode_per_foot: 0.02,
            sigma_z_offset_episode: 0.0,
            outlier_prob: 0.02,
            outlier_range: (0.1, 0.6),
            seed,
        }
    }

    pub fn offset(seed: u64) -> Self {
        Self {
            mode: NoiseMode::Offset,
            sigma_z_offset_episode: 0.1,
            ..Self::nominal(seed)
        }
    }

    pub fn noisy(seed: u64) -> Self {
        Self {
            mode: NoiseMode::Noisy,
            sigma_xy_step: 0.05,
            sigma_z_step: 0.1,
            outlier_prob: 0.1,
            ..Self::nominal(seed)
        }
    }

    pub fn for_mode(mode: NoiseMode, seed: u64) -> Self {
        match mode {
            NoiseMode::Nominal => Self::nominal(seed),
            NoiseMode::Offset => Self::offset(seed),
            NoiseMode::Noisy => Self::noisy(seed),
        }
    }

    pub fn noiseless(seed: u64) -> Self {
        Self {
            sigma_xy_step: 0.0,
            sigma_z_step: 0.0,
            sigma_xy_episode: 0.0,
            sigma_z_episode_per_foot: 0.0,
            sigma_z_offset_episode: 0.0,
            outlier_prob: 0.0,
            ..Self::nominal(seed)
        }
    }

    /// Standard deviation of the height error of a non-outlier point on flat ground.
    pub fn composite_z_sigma(&self) -> f64 {
        (self.sigma_z_step.powi(2) + self.sigma_z_episode_per_foot.powi(2) + self.sigma_z_offset_episode.powi(2))
            .sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_xy_step", self.sigma_xy_step),
            ("sigma_z_step", self.sigma_z_step),
            ("sigma_xy_episode", self.sigma_xy_episode),
            ("sigma_z_episode_per_foot", self.sigma_z_episode_per_foot),
            ("sigma_z_offset_episode", self.sigma_z_offset_episode),
        ] {
            check_range(name, v, 0.0, f64::MAX)?;
        }
        check_range("outlier_prob", self.outlier_prob, 0.0, 1.0)?;
        let (lo, hi) = self.outlier_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("outlier_range", "expected finite lo <= hi"));
        }
        Ok(())
    }
}

/// Episode-level noise draws for one foot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeNoise {
    pub episode: u64,
    pub foot: Foot,
    pub xy_shift: [f64; 2],
    pub z_offset: f64,
}

const EPISODE_TAG: u64 = 0xE915_0DE0;
const STEP_TAG: u64 = 0x57E9;

impl EpisodeNoise {
    pub fn draw(profile: &NoiseProfile, episode: u64, foot: Foot) -> Self {
        let mut rng = rng_from(&[profile.seed, episode, foot.index() as u64, EPISODE_TAG]);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let xy_shift = [
            profile.sigma_xy_episode * normal(),
            profile.sigma_xy_episode * normal(),
        ];
        let z_offset = profile.sigma_z_episode_per_foot * normal() + profile.sigma_z_offset_episode * normal();
        Self {
            episode,
            foot,
            xy_shift,
            z_offset,
        }
    }
}

/// A noisy sample together with the indices replaced by outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySample {
    pub sample: ExteroSample,
    pub outliers: Vec<bool>,
}

/// Re-queries the field at perturbed pattern coordinates and perturbs the
/// heights; see [`apply_noise_detailed`].
pub fn apply_noise(
    clean: &ExteroSample,
    field: &HeightField,
    profile: &NoiseProfile,
    episode: &EpisodeNoise,
    t: u64,
) -> ExteroSample {
    apply_noise_detailed(clean, field, profile, episode, t).sample
}

/// Each point is shifted by the episode and step xy offsets of its foot and
/// re-sampled from `field`; the height then receives the episode z offset plus
/// per-point step noise. With probability `outlier_prob` a point is instead
/// replaced by the re-sampled height plus a uniform draw from `outlier_range`.
/// Deterministic in `(profile.seed, episode, foot, t)`.
pub fn apply_noise_detailed(
    clean: &ExteroSample,
    field: &HeightField,
    profile: &NoiseProfile,
    episode: &EpisodeNoise,
    t: u64,
) -> NoisySample {
    let mut rng = rng_from(&[profile.seed, episode.episode, clean.foot.index() as u64, t, STEP_TAG]);
    let step_shift: [f64; 2] = [
        profile.sigma_xy_step * rng.sample::<f64, _>(StandardNormal),
        profile.sigma_xy_step * rng.sample::<f64, _>(StandardNormal),
    ];
    let dx = episode.xy_shift[0] + step_shift[0];
    let dy = episode.xy_shift[1] + step_shift[1];
    let (lo, hi) = profile.outlier_range;
    let mut outliers = vec![false; clean.heights.len()];
    let heights = clean
        .world_points
        .iter()
        .zip(&clean.heights)
        .zip(outliers.iter_mut())
        .map(|((&[x, y], &clean_h), is_outlier)| {
            let z_noise: f64 = profile.sigma_z_step * rng.sample::<f64, _>(StandardNormal);
            let u: f64 = rng.random();
            let magnitude = lo + (hi - lo) * rng.random::<f64>();
            let resampled = if dx == 0.0 && dy == 0.0 {
                clean_h
            } else {
                field.height_at(x + dx, y + dy)
            };
            if u < profile.outlier_prob {
                *is_outlier = true;
                resampled + magnitude
            } else {
                resampled + episode.z_offset + z_noise
            }
        })
        .collect();
    NoisySample {
        sample: ExteroSample {
            foot: clean.foot,
            heights,
            world_points: clean.world_points.clone(),
        },
        outliers,
    }
}

/// Rasterizes sample points into an 8-bit grayscale scatter image for
/// debugging; unsampled pixels stay black.
pub fn render_scatter(samples: &[&ExteroSample], pixels_per_metre: f64) -> image::GrayImage {
    let pts: Vec<([f64; 2], f64)> = samples
        .iter()
        .flat_map(|s| s.world_points.iter().copied().zip(s.heights.iter().copied()))
        .collect();
    if pts.is_empty() {
        return image::GrayImage::new(1, 1);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    let (mut h0, mut h1) = (f64::MAX, f64::MIN);
    for ([x, y], h) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
        h0 = h0.min(*h);
        h1 = h1.max(*h);
    }
    let w = ((x1 - x0) * pixels_per_metre).ceil() as u32 + 3;
    let h = ((y1 - y0) * pixels_per_metre).ceil() as u32 + 3;
    let mut img = image::GrayImage::new(w, h);
    let span = (h1 - h0).max(1e-9);
    for ([x, y], z) in pts {
        let px = ((x - x0) * pixels_per_metre).round() as u32 + 1;
        let py = h - 2 - ((y - y0) * pixels_per_metre).round() as u32;
        let level = (55.0 + 200.0 * (z - h0) / span).round() as u8;
        img.put_pixel(px, py, image::Luma([level]));
    }
    img
}
