//! Procedural height fields for the training terrain modes.
//!
//! Every generator first builds a non-negative base field and multiplies it by
//! the terrain curriculum factor `c_t` as the last step, so `c_t = 0` always
//! yields flat ground and cell magnitudes grow monotonically with `c_t`.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::rng::{derive_seed, mix64, rng_from};

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_EXTENT: f64 = 20.0;

/// Row-major elevation grid. Cell `(row, col)` is centred at
/// `origin + (col * resolution, row * resolution)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub rows: usize,
    pub cols: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub heights: Vec<f64>,
}

impl HeightField {
    pub fn flat(rows: usize, cols: usize, resolution: f64) -> Result<Self> {
        Self::from_heights(rows, cols, resolution, [0.0, 0.0], vec![0.0; rows * cols])
    }

    pub fn from_heights(
        rows: usize,
        cols: usize,
        resolution: f64,
        origin: [f64; 2],
        heights: Vec<f64>,
    ) -> Result<Self> {
        let field = Self {
            rows,
            cols,
            resolution,
            origin,
            heights,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::invalid("resolution", "must be positive"));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("size", "height field must have at least one cell"));
        }
        if self.heights.len() != self.rows * self.cols {
            return Err(Error::shape("height field", self.rows * self.cols, self.heights.len()));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("origin".into()));
        }
        if let Some(i) = self.heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::NonFinite(format!("heights[{i}]")));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + col as f64 * self.resolution,
            self.origin[1] + row as f64 * self.resolution,
        ]
    }

    /// World-space extent `[x_min, y_min, x_max, y_max]` of the cell centres.
    pub fn extent(&self) -> [f64; 4] {
        let [x1, y1] = self.cell_center(self.rows - 1, self.cols - 1);
        [self.origin[0], self.origin[1], x1, y1]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [x0, y0, x1, y1] = self.extent();
        (x0..=x1).contains(&x) && (y0..=y1).contains(&y)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.heights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| (lo.min(h), hi.max(h)))
    }

    /// Bilinear interpolation between cell centres, clamped to the edge cells
    /// outside the extent.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.origin[0]) / self.resolution).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((y - self.origin[1]) / self.resolution).clamp(0.0, (self.rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.cols - 1);
        let r0 = (fy.floor() as usize).min(self.rows - 1);
        let c1 = (c0 + 1).min(self.cols - 1);
        let r1 = (r0 + 1).min(self.rows - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h00 = self.get(r0, c0);
        let h01 = self.get(r0, c1);
        let h10 = self.get(r1, c0);
        let h11 = self.get(r1, c1);
        let top = if tx == 0.0 { h00 } else { h00 + tx * (h01 - h00) };
        let bottom = if tx == 0.0 { h10 } else { h10 + tx * (h11 - h10) };
        if ty == 0.0 {
            top
        } else {
            top + ty * (bottom - top)
        }
    }

    /// Zeroes every cell whose centre lies within `radius` of `center`.
    pub fn flatten_disk(&mut self, center: [f64; 2], radius: f64) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let [x, y] = self.cell_center(r, c);
                if (x - center[0]).hypot(y - center[1]) <= radius {
                    self.heights[r * self.cols + c] = 0.0;
                }
            }
        }
    }

    /// Distinct heights after rounding to `quantum`, ascending.
    pub fn distinct_levels(&self, quantum: f64) -> Vec<f64> {
        let mut keys: Vec<i64> = self.heights.iter().map(|h| (h / quantum).round() as i64).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter().map(|k| k as f64 * quantum).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        let field: Self = serde_json::from_reader(std::io::BufReader::new(file))?;
        field.validate()?;
        Ok(field)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        pgm::encode(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        pgm::decode(std::io::BufReader::new(file))
    }

    /// Loads `.json` or `.pgm` based on the file extension.
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => Self::read_pgm(path),
            _ => Self::read_json(path),
        }
    }
}

/// 16-bit binary PGM with millimetre quantization.
///
/// The header carries `# resolution <m>`, `# origin <x> <y>` and
/// `# offset_mm <k>` comments; a pixel value `p` decodes to `(p + k) / 1000` m.
/// Image row 0 is height-field row 0.
pub mod pgm {
    use super::*;

    pub fn encode<W: Write>(field: &HeightField, w: &mut W) -> Result<()> {
        let mm: Vec<i64> = field.heights.iter().map(|h| (h * 1000.0).round() as i64).collect();
        let lo = mm.iter().copied().min().unwrap_or(0).min(0);
        let hi = mm.iter().copied().max().unwrap_or(0);
        if hi - lo > u16::MAX as i64 {
            return Err(Error::format("pgm", "height range exceeds 65.535 m"));
        }
        write!(
            w,
            "P5\n# terrastride heightfield\n# resolution {}\n# origin {} {}\n# offset_mm {}\n{} {}\n65535\n",
            field.resolution, field.origin[0], field.origin[1], lo, field.cols, field.rows
        )?;
        let mut buf = Vec::with_capacity(mm.len() * 2);
        for v in mm {
            buf.extend_from_slice(&((v - lo) as u16).to_be_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn decode<R: BufRead>(mut r: R) -> Result<HeightField> {
        let mut resolution = None;
        let mut origin = [0.0, 0.0];
        let mut offset_mm = 0i64;
        let mut tokens: Vec<String> = Vec::new();
        while tokens.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::format("pgm", "truncated header"));
            }
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                let parts: Vec<&str> = comment.split_whitespace().collect();
                match parts.as_slice() {
                    ["resolution", v] => resolution = v.parse().ok(),
                    ["origin", x, y] => {
                        origin = [
                            x.parse().map_err(|_| Error::format("pgm", "bad origin"))?,
                            y.parse().map_err(|_| Error::format("pgm", "bad origin"))?,
                        ]
                    }
                    ["offset_mm", k] => {
                        offset_mm = k.parse().map_err(|_| Error::format("pgm", "bad offset_mm"))?
                    }
                    _ => {}
                }
                continue;
            }
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        if tokens[0] != "P5" {
            return Err(Error::format("pgm", format!("unsupported magic {}", tokens[0])));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format("pgm", format!("bad number {s}")));
        let cols = parse(&tokens[1])?;
        let rows = parse(&tokens[2])?;
        let maxval = parse(&tokens[3])?;
        if maxval != 65535 {
            return Err(Error::format("pgm", "only 16-bit PGM is supported"));
        }
        let mut data = vec![0u8; rows * cols * 2];
        r.read_exact(&mut data)
            .map_err(|_| Error::format("pgm", "truncated pixel data"))?;
        let heights = data
            .chunks_exact(2)
            .map(|b| (u16::from_be_bytes([b[0], b[1]]) as i64 + offset_mm) as f64 / 1000.0)
            .collect();
        HeightField::from_heights(rows, cols, resolution.unwrap_or(DEFAULT_RESOLUTION), origin, heights)
    }
}

// ---------------------------------------------------------------------------
// Gradient noise

const GRADIENTS: [[f64; 2]; 8] = [
    [1.0, 0.0],
    [-1.0, 0.0],
    [0.0, 1.0],
    [0.0, -1.0],
    [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
    [-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
    [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
    [-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
];

fn lattice_gradient(ix: i64, iy: i64, seed: u64) -> [f64; 2] {
    let h = mix64(seed ^ mix64(ix as u64 ^ mix64(iy as u64)));
    GRADIENTS[(h >> 61) as usize]
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Two-dimensional gradient noise in [-1, 1] with zeros on the integer lattice
/// of `(x * frequency, y * frequency)`.
pub fn perlin2(x: f64, y: f64, seed: u64, frequency: f64) -> f64 {
    let x = x * frequency;
    let y = y * frequency;
    let x0 = x.floor();
    let y0 = y.floor();
    let (ix, iy) = (x0 as i64, y0 as i64);
    let (fx, fy) = (x - x0, y - y0);
    let dot = |cx: i64, cy: i64, dx: f64, dy: f64| {
        let g = lattice_gradient(cx, cy, seed);
        g[0] * dx + g[1] * dy
    };
    let n00 = dot(ix, iy, fx, fy);
    let n10 = dot(ix + 1, iy, fx - 1.0, fy);
    let n01 = dot(ix, iy + 1, fx, fy - 1.0);
    let n11 = dot(ix + 1, iy + 1, fx - 1.0, fy - 1.0);
    let u = fade(fx);
    let v = fade(fy);
    let a = n00 + u * (n10 - n00);
    let b = n01 + u * (n11 - n01);
    a + v * (b - a)
}

// ---------------------------------------------------------------------------
// Terrain specification

/// Two-octave hills; also the base of quantized hills and edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillsParams {
    /// Spatial frequency of the low octave in cycles per metre.
    pub low_frequency: f64,
    /// High octave frequency as a multiple of `low_frequency`.
    pub high_ratio: f64,
    pub low_weight: f64,
    pub high_weight: f64,
    pub max_height: f64,
}

impl Default for HillsParams {
    fn default() -> Self {
        Self {
            low_frequency: 0.2,
            high_ratio: 4.0,
            low_weight: 0.7,
            high_weight: 0.3,
            max_height: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TerrainMode {
    Flat,
    Hills(HillsParams),
    Edges { height: f64, frequency: f64 },
    Squares { side: f64, max_height: f64 },
    QuantizedHills { step: f64, hills: HillsParams },
    Stairs { run: f64, rise: f64, count: usize, landing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    Flat,
    Hills,
    Edges,
    Squares,
    QuantizedHills,
    Stairs,
}

impl TerrainKind {
    /// The five non-flat training modes.
    pub const TRAINING: [TerrainKind; 5] = [
        TerrainKind::Hills,
        TerrainKind::Edges,
        TerrainKind::Squares,
        TerrainKind::QuantizedHills,
        TerrainKind::Stairs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TerrainKind::Flat => "flat",
            TerrainKind::Hills => "hills",
            TerrainKind::Edges => "edges",
            TerrainKind::Squares => "squares",
            TerrainKind::QuantizedHills => "quantized_hills",
            TerrainKind::Stairs => "stairs",
        }
    }
}

impl std::str::FromStr for TerrainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "flat" => TerrainKind::Flat,
            "hills" => TerrainKind::Hills,
            "edges" => TerrainKind::Edges,
            "squares" => TerrainKind::Squares,
            "quantized_hills" | "quantized-hills" => TerrainKind::QuantizedHills,
            "stairs" => TerrainKind::Stairs,
            other => return Err(Error::invalid("mode", format!("unknown terrain mode `{other}`"))),
        })
    }
}

pub const EDGE_HEIGHT_RANGE: (f64, f64) = (0.15, 0.25);
pub const SQUARE_SIDE_RANGE: (f64, f64) = (0.4, 0.6);
pub const SQUARE_HEIGHT_RANGE: (f64, f64) = (0.0, 0.4);
pub const QUANT_STEP_RANGE: (f64, f64) = (0.12, 0.18);
pub const STAIR_RUN_RANGE: (f64, f64) = (0.3, 0.4);
pub const STAIR_RISE_RANGE: (f64, f64) = (0.1, 0.22);
pub const STAIRS_PER_FLIGHT: usize = 10;
pub const STAIR_LANDING: f64 = 1.0;
const EDGE_FREQUENCY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainSpec {
    pub seed: u64,
    #[serde(flatten)]
    pub mode: TerrainMode,
}

impl TerrainSpec {
    pub fn flat() -> Self {
        Self { seed: 0, mode: TerrainMode::Flat }
    }

    /// Draws mode parameters uniformly from their allowed ranges.
    pub fn random(kind: TerrainKind, seed: u64) -> Self {
        let mut rng = rng_from(&[seed, 0x7E44A1]);
        let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        let mode = match kind {
            TerrainKind::Flat => TerrainMode::Flat,
            TerrainKind::Hills => TerrainMode::Hills(HillsParams::default()),
            TerrainKind::Edges => TerrainMode::Edges {
                height: draw(EDGE_HEIGHT_RANGE),
                frequency: EDGE_FREQUENCY,
            },
            TerrainKind::Squares => TerrainMode::Squares {
                side: draw(SQUARE_SIDE_RANGE),
                max_height: SQUARE_HEIGHT_RANGE.1,
            },
            TerrainKind::QuantizedHills => TerrainMode::QuantizedHills {
                step: draw(QUANT_STEP_RANGE),
                hills: HillsParams::default(),
            },
            TerrainKind::Stairs => TerrainMode::Stairs {
                run: draw(STAIR_RUN_RANGE),
                rise: draw(STAIR_RISE_RANGE),
                count: STAIRS_PER_FLIGHT,
                landing: STAIR_LANDING,
            },
        };
        Self { seed, mode }
    }

    pub fn kind(&self) -> TerrainKind {
        match self.mode {
            TerrainMode::Flat => TerrainKind::Flat,
            TerrainMode::Hills(_) => TerrainKind::Hills,
            TerrainMode::Edges { .. } => TerrainKind::Edges,
            TerrainMode::Squares { .. } => TerrainKind::Squares,
            TerrainMode::QuantizedHills { .. } => TerrainKind::QuantizedHills,
            TerrainMode::Stairs { .. } => TerrainKind::Stairs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let hills_ok = |h: &HillsParams| -> Result<()> {
            check_range("low_frequency", h.low_frequency, f64::MIN_POSITIVE, f64::MAX)?;
            check_range("high_ratio", h.high_ratio, f64::MIN_POSITIVE, f64::MAX)?;
            check_range("low_weight", h.low_weight, 0.0, f64::MAX)?;
            check_range("high_weight", h.high_weight, 0.0, f64::MAX)?;
            check_range("max_height", h.max_height, 0.0, f64::MAX)
        };
        match &self.mode {
            TerrainMode::Flat => Ok(()),
            TerrainMode::Hills(h) => hills_ok(h),
            TerrainMode::Edges { height, frequency } => {
                check_range("edge height h", *height, EDGE_HEIGHT_RANGE.0, EDGE_HEIGHT_RANGE.1)?;
                check_range("edge frequency", *frequency, f64::MIN_POSITIVE, f64::MAX)
            }
            TerrainMode::Squares { side, max_height } => {
                check_range("square side d", *side, SQUARE_SIDE_RANGE.0, SQUARE_SIDE_RANGE.1)?;
                check_range("square height h", *max_height, SQUARE_HEIGHT_RANGE.0, SQUARE_HEIGHT_RANGE.1)
            }
            TerrainMode::QuantizedHills { step, hills } => {
                check_range("quantization step h", *step, QUANT_STEP_RANGE.0, QUANT_STEP_RANGE.1)?;
                hills_ok(hills)
            }
            TerrainMode::Stairs { run, rise, count, landing } => {
                check_range("stair run d", *run, STAIR_RUN_RANGE.0, STAIR_RUN_RANGE.1)?;
                check_range("stair rise r", *rise, STAIR_RISE_RANGE.0, STAIR_RISE_RANGE.1)?;
                check_range("landing", *landing, 0.0, f64::MAX)?;
                if *count == 0 {
                    return Err(Error::invalid("stair count", "must be at least 1"));
                }
                Ok(())
            }
        }
    }
}

/// Generates a `rows × cols` height field with its origin at `(0, 0)`.
pub fn generate(spec: &TerrainSpec, size: (usize, usize), resolution: f64, c_t: f64) -> Result<HeightField> {
    generate_at(spec, size, resolution, [0.0, 0.0], c_t)
}

pub fn generate_at(
    spec: &TerrainSpec,
    (rows, cols): (usize, usize),
    resolution: f64,
    origin: [f64; 2],
    c_t: f64,
) -> Result<HeightField> {
    spec.validate()?;
    check_range("c_t", c_t, 0.0, 1.0)?;
    let mut field = HeightField::flat(rows, cols, resolution)?;
    field.origin = origin;
    let seed = spec.seed;

    let centers = |f: &HeightField| -> Vec<[f64; 2]> {
        (0..f.rows)
            .flat_map(|r| (0..f.cols).map(move |c| (r, c)))
            .map(|(r, c)| f.cell_center(r, c))
            .collect()
    };

    match spec.mode {
        TerrainMode::Flat => {}
        TerrainMode::Hills(h) => {
            let base = hills_base(&centers(&field), seed, &h);
            field.heights = base.into_iter().map(|b| b * c_t).collect();
        }
        TerrainMode::QuantizedHills { step, hills } => {
            let base = hills_base(&centers(&field), seed, &hills);
            field.heights = base
                .into_iter()
                .map(|b| {
                    let k = (b / step).floor();
                    k * step * c_t
                })
                .collect();
        }
        TerrainMode::Edges { height, frequency } => {
            let level_seed = derive_seed(&[seed, 2]);
            field.heights = centers(&field)
                .into_iter()
                .map(|[x, y]| if perlin2(x, y, level_seed, frequency) > 0.0 { height * c_t } else { 0.0 })
                .collect();
        }
        TerrainMode::Squares { side, max_height } => {
            let sq_seed = derive_seed(&[seed, 3]);
            field.heights = centers(&field)
                .into_iter()
                .map(|[x, y]| {
                    let i = ((x - origin[0]) / side).floor() as i64;
                    let j = ((y - origin[1]) / side).floor() as i64;
                    square_height(sq_seed, i, j, max_height) * c_t
                })
                .collect();
        }
        TerrainMode::Stairs { run, rise, count, landing } => {
            field.heights = centers(&field)
                .into_iter()
                .map(|[x, _]| stair_level(x - origin[0], run, count, landing) as f64 * rise * c_t)
                .collect();
        }
    }
    Ok(field)
}

fn hills_base(points: &[[f64; 2]], seed: u64, h: &HillsParams) -> Vec<f64> {
    let low_seed = derive_seed(&[seed, 0]);
    let high_seed = derive_seed(&[seed, 1]);
    let raw: Vec<f64> = points
        .iter()
        .map(|&[x, y]| {
            h.low_weight * perlin2(x, y, low_seed, h.low_frequency)
                + h.high_weight * perlin2(x, y, high_seed, h.low_frequency * h.high_ratio)
        })
        .collect();
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= f64::EPSILON {
        return vec![0.0; raw.len()];
    }
    raw.into_iter().map(|v| (v - lo) / (hi - lo) * h.max_height).collect()
}

fn square_height(seed: u64, i: i64, j: i64, max_height: f64) -> f64 {
    let h = mix64(seed ^ mix64(i as u64 ^ mix64(j as u64 ^ 0x5151)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * max_height
}

/// Integer stair level at distance `u` along +x from the stairs origin.
///
/// One period is: landing at 0, `count` ascending stairs, landing at the top,
/// `count` descending stairs whose last stair is level 0 again.
pub fn stair_level(u: f64, run: f64, count: usize, landing: f64) -> i64 {
    let n = count as f64;
    let period = 2.0 * landing + 2.0 * n * run;
    let u = u.rem_euclid(period);
    let count = count as i64;
    if u < landing {
        0
    } else if u < landing + n * run {
        (((u - landing) / run).floor() as i64 + 1).min(count)
    } else if u < 2.0 * landing + n * run {
        count
    } else {
        let k = ((u - 2.0 * landing - n * run) / run).floor() as i64;
        (count - 1 - k).clamp(0, count - 1)
    }
}

// ---------------------------------------------------------------------------
// Curriculum

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub c_t: f64,
    pub c_r: f64,
    pub ramp_start_step: u64,
    pub ramp_end_step: u64,
    /// Step at which the reward switches from clock-based (`c_r = 1`) to
    /// airtime-based (`c_r = 0`). `None` keeps the clock reward.
    pub reward_switch_step: Option<u64>,
}

impl CurriculumState {
    pub fn new(ramp_start_step: u64, ramp_end_step: u64, reward_switch_step: Option<u64>) -> Result<Self> {
        if ramp_start_step > ramp_end_step {
            return Err(Error::invalid("ramp", "ramp_start must not exceed ramp_end"));
        }
        Ok(Self {
            c_t: 0.0,
            c_r: 1.0,
            ramp_start_step,
            ramp_end_step,
            reward_switch_step,
        })
    }

    /// Fixed factors, used when no schedule is involved.
    pub fn fixed(c_t: f64, c_r: f64) -> Self {
        Self {
            c_t,
            c_r,
            ramp_start_step: 0,
            ramp_end_step: 0,
            reward_switch_step: None,
        }
    }
}

/// Linear terrain ramp between the start and end steps, and the 1 → 0 reward switch.
pub fn curriculum_step(state: &CurriculumState, global_step: u64) -> CurriculumState {
    let (start, end) = (state.ramp_start_step, state.ramp_end_step);
    let c_t = if end == start {
        if global_step >= start {
            1.0
        } else {
            0.0
        }
    } else {
        ((global_step as f64 - start as f64) / (end - start) as f64).clamp(0.0, 1.0)
    };
    let c_r = match state.reward_switch_step {
        Some(s) if global_step >= s => 0.0,
        _ => 1.0,
    };
    CurriculumState { c_t, c_r, ..*state }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perlin_vanishes_on_lattice() {
        for ix in -3..4 {
            for iy in -3..4 {
                assert_eq!(perlin2(ix as f64, iy as f64, 9, 1.0), 0.0);
                assert_eq!(perlin2(ix as f64 / 0.5, iy as f64 / 0.5, 9, 0.5), 0.0);
            }
        }
    }

    #[test]
    fn perlin_is_deterministic() {
        assert_eq!(perlin2(1.234, -5.6, 77, 0.3), perlin2(1.234, -5.6, 77, 0.3));
        assert_ne!(perlin2(1.234, -5.6, 77, 0.3), perlin2(1.234, -5.6, 78, 0.3));
    }

    #[test]
    fn height_at_center_midpoint_and_clamp() {
        let field = HeightField::from_heights(1, 2, 0.1, [0.0, 0.0], vec![0.0, 0.4]).unwrap();
        assert_eq!(field.height_at(0.0, 0.0), 0.0);
        assert_eq!(field.height_at(0.1, 0.0), 0.4);
        assert!((field.height_at(0.05, 0.0) - 0.2).abs() < 1e-15);
        assert_eq!(field.height_at(10.1, 0.0), 0.4);
        assert_eq!(field.height_at(-10.0, 3.0), 0.0);
    }

    #[test]
    fn zero_curriculum_is_flat() {
        for kind in TerrainKind::TRAINING {
            let f = generate(&TerrainSpec::random(kind, 4), (40, 40), 0.05, 0.0).unwrap();
            assert!(f.heights.iter().all(|&h| h == 0.0), "{kind:?}");
        }
    }

    #[test]
    fn stairs_first_flight_plateaus() {
        let spec = TerrainSpec {
            seed: 0,
            mode: TerrainMode::Stairs { run: 0.3, rise: 0.1, count: 10, landing: STAIR_LANDING },
        };
        let f = generate(&spec, (4, 400), 0.01, 1.0).unwrap();
        for k in 1..=10 {
            let x = STAIR_LANDING + (k as f64 - 0.5) * 0.3;
            assert!((f.height_at(x, 0.0) - 0.1 * k as f64).abs() < 1e-12, "stair {k}");
        }
    }

    #[test]
    fn edges_levels_scale_with_curriculum() {
        let spec = TerrainSpec {
            seed: 11,
            mode: TerrainMode::Edges { height: 0.2, frequency: 0.5 },
        };
        let f = generate(&spec, (200, 200), 0.05, 0.5).unwrap();
        let levels = f.distinct_levels(1e-9);
        assert_eq!(levels.len(), 2);
        assert!((levels[0]).abs() < 1e-12 && (levels[1] - 0.1).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_parameter_names_itself() {
        let spec = TerrainSpec {
            seed: 0,
            mode: TerrainMode::Stairs { run: 0.5, rise: 0.1, count: 10, landing: 1.0 },
        };
        match generate(&spec, (4, 4), 0.05, 1.0) {
            Err(Error::OutOfRange { name, min, max, .. }) => {
                assert_eq!(name, "stair run d");
                assert_eq!((min, max), STAIR_RUN_RANGE);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(generate(&TerrainSpec::flat(), (4, 4), 0.05, 1.5).is_err());
    }

    #[test]
    fn curriculum_ramp() {
        let s = CurriculumState::new(100, 300, Some(500)).unwrap();
        assert_eq!(curriculum_step(&s, 50).c_t, 0.0);
        assert_eq!(curriculum_step(&s, 200).c_t, 0.5);
        assert_eq!(curriculum_step(&s, 1000).c_t, 1.0);
        assert_eq!(curriculum_step(&s, 499).c_r, 1.0);
        assert_eq!(curriculum_step(&s, 500).c_r, 0.0);
        let step = CurriculumState::new(10, 10, None).unwrap();
        assert_eq!(curriculum_step(&step, 9).c_t, 0.0);
        assert_eq!(curriculum_step(&step, 10).c_t, 1.0);
        assert!(CurriculumState::new(5, 4, None).is_err());
    }

    #[test]
    fn pgm_round_trip_to_millimetre() {
        let spec = TerrainSpec::random(TerrainKind::Hills, 3);
        let mut f = generate_at(&spec, (30, 50), 0.05, [-1.0, 2.5], 1.0).unwrap();
        f.heights[7] = -0.25;
        let mut buf = Vec::new();
        pgm::encode(&f, &mut buf).unwrap();
        let back = pgm::decode(buf.as_slice()).unwrap();
        assert_eq!((back.rows, back.cols, back.resolution, back.origin), (30, 50, 0.05, [-1.0, 2.5]));
        for (a, b) in f.heights.iter().zip(&back.heights) {
            assert!((a - b).abs() <= 0.0005 + 1e-12);
        }
    }
}
