//! Training-run summaries, acceptance evaluation and PNG plots.
//!
//! A run directory written by `train-denoiser` or `distill` holds
//! `metrics.csv` (one row per epoch) and `summary.json` ([`RunSummary`]).
//! [`evaluate_runs`] turns a set of runs into an [`AcceptanceSummary`] that
//! lists every criterion id; criteria that need no training run are marked
//! [`Status::NotEvaluated`] and belong to the acceptance test target.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::belief::{EpochMetrics, EvalMetrics};
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Held-out reconstruction must be at most this fraction of the raw noisy error.
pub const DENOISE_RATIO: f64 = 0.5;
pub const DENOISE_MIN_STEPS: usize = 200_000;
pub const DISTILL_RATIO: f64 = 0.1;
pub const DISTILL_MAX_EPOCHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Denoise,
    Distill,
}

/// Held-out metrics of the retained model with the held-out episodes rebuilt
/// under each noise mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub nominal: EvalMetrics,
    pub offset: EvalMetrics,
    pub noisy: EvalMetrics,
}

/// Training steps per noise mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeSteps {
    pub nominal: usize,
    pub offset: usize,
    pub noisy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: RunKind,
    pub seed: u64,
    pub train_steps: ModeSteps,
    pub heldout_steps: usize,
    pub best_epoch: usize,
    pub initial: EvalMetrics,
    pub best: EvalMetrics,
    pub by_mode: ModeMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub path: PathBuf,
    pub summary: RunSummary,
    pub history: Vec<EpochMetrics>,
}

/// Loads a run from its directory, or from its `metrics.csv` path.
pub fn load_run(path: &Path) -> Result<Run> {
    let dir = if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let metrics_path = if path.is_dir() { dir.join(METRICS_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&metrics_path).map_err(|e| Error::file(&metrics_path, e))?;
    let history = EpochMetrics::read_csv(&text)?;
    if history.is_empty() {
        return Err(Error::format("metrics csv", "no epochs recorded"));
    }
    let summary_path = dir.join(SUMMARY_FILE);
    let summary_text = std::fs::read_to_string(&summary_path).map_err(|e| Error::file(&summary_path, e))?;
    let summary: RunSummary = serde_json::from_str(&summary_text)?;
    Ok(Run {
        path: dir,
        summary,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotEvaluated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub status: Status,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub criteria: Vec<CriterionResult>,
}

impl AcceptanceSummary {
    /// True when no evaluated criterion failed.
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail)
    }
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "terrain_contracts"),
    (2, "gait_clocks"),
    (3, "rewards"),
    (4, "gradient_check"),
    (5, "denoising"),
    (6, "gate_direction"),
    (7, "distillation"),
    (8, "command_sampler"),
    (9, "cli_determinism"),
];

fn criterion(id: u8) -> CriterionResult {
    let name = CRITERIA.iter().find(|(i, _)| *i == id).map(|(_, n)| *n).unwrap_or("unknown");
    CriterionResult {
        id,
        name: name.to_string(),
        status: Status::NotEvaluated,
        measured: None,
        threshold: None,
        detail: "checked by the acceptance test target".into(),
    }
}

/// Combines a criterion across several runs: any failure fails it.
fn combine(results: Vec<CriterionResult>, id: u8, missing: &str) -> CriterionResult {
    if results.is_empty() {
        return CriterionResult {
            detail: missing.into(),
            ..criterion(id)
        };
    }
    results
        .iter()
        .find(|r| r.status == Status::Fail)
        .unwrap_or(&results[0])
        .clone()
}

fn denoise_ratio(run: &Run) -> CriterionResult {
    let m = run.summary.by_mode.offset;
    let ratio = m.reconstruction_mse / m.noisy_mse;
    let steps = run.summary.train_steps.offset;
    let ok = ratio <= DENOISE_RATIO && steps >= DENOISE_MIN_STEPS;
    CriterionResult {
        status: if ok { Status::Pass } else { Status::Fail },
        measured: Some(ratio),
        threshold: Some(DENOISE_RATIO),
        detail: format!(
            "{}: reconstruction {:.3e} vs raw {:.3e} on offset held-out; {} offset training steps (need {})",
            run.path.display(),
            m.reconstruction_mse,
            m.noisy_mse,
            steps,
            DENOISE_MIN_STEPS
        ),
        ..criterion(5)
    }
}

fn gate_direction(run: &Run) -> CriterionResult {
    let m = run.summary.by_mode;
    let diff = m.noisy.mean_gate - m.nominal.mean_gate;
    CriterionResult {
        status: if diff < 0.0 { Status::Pass } else { Status::Fail },
        measured: Some(diff),
        threshold: Some(0.0),
        detail: format!(
            "{}: mean gate noisy {:.4} vs nominal {:.4}",
            run.path.display(),
            m.noisy.mean_gate,
            m.nominal.mean_gate
        ),
        ..criterion(6)
    }
}

fn distill_ratio(run: &Run) -> CriterionResult {
    let initial = run.summary.initial.imitation_mse;
    let best = run
        .history
        .iter()
        .filter(|m| m.epoch <= DISTILL_MAX_EPOCHS)
        .min_by(|a, b| a.heldout.imitation_mse.total_cmp(&b.heldout.imitation_mse));
    let (ratio, epoch) = match best {
        Some(m) if initial > 0.0 => (m.heldout.imitation_mse / initial, m.epoch),
        _ => (f64::INFINITY, 0),
    };
    CriterionResult {
        status: if ratio <= DISTILL_RATIO { Status::Pass } else { Status::Fail },
        measured: Some(ratio),
        threshold: Some(DISTILL_RATIO),
        detail: format!(
            "{}: best held-out imitation {:.3e} at epoch {epoch} vs {:.3e} at initialization",
            run.path.display(),
            ratio * initial,
            initial
        ),
        ..criterion(7)
    }
}

/// Evaluates the run-based criteria (5, 6, 7) and lists the others as not evaluated.
pub fn evaluate_runs(runs: &[Run]) -> AcceptanceSummary {
    let of = |kind: RunKind| runs.iter().filter(move |r| r.summary.kind == kind);
    let criteria = CRITERIA
        .iter()
        .map(|&(id, _)| match id {
            5 => combine(of(RunKind::Denoise).map(denoise_ratio).collect(), 5, "no denoise run given"),
            6 => combine(of(RunKind::Denoise).map(gate_direction).collect(), 6, "no denoise run given"),
            7 => combine(of(RunKind::Distill).map(distill_ratio).collect(), 7, "no distill run given"),
            _ => criterion(id),
        })
        .collect();
    AcceptanceSummary { criteria }
}

// ---------------------------------------------------------------------------
// Plots

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const FRAME: Rgb<u8> = Rgb([40, 40, 40]);
pub const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

pub struct Series<'a> {
    pub points: &'a [(f64, f64)],
    pub color: [u8; 3],
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left);
        let py = self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top);
        (px, py)
    }
}

fn put(img: &mut RgbImage, x: f64, y: f64, c: Rgb<u8>) {
    if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn segment(img: &mut RgbImage, (ax, ay): (f64, f64), (bx, by): (f64, f64), c: Rgb<u8>, thick: bool) {
    let n = (bx - ax).abs().max((by - ay).abs()).ceil().max(1.0) as usize;
    for i in 0..=n {
        let s = i as f64 / n as f64;
        let (x, y) = (ax + s * (bx - ax), ay + s * (by - ay));
        put(img, x, y, c);
        if thick {
            put(img, x + 1.0, y, c);
            put(img, x, y + 1.0, c);
        }
    }
}

fn blank_frame(width: u32, height: u32, x: (f64, f64), y: (f64, f64)) -> (RgbImage, Frame) {
    let mut img = RgbImage::from_pixel(width, height, WHITE);
    let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let (x0, x1) = pad(x.0, x.1);
    let (y0, y1) = pad(y.0, y.1);
    let margin = 0.05 * (y1 - y0);
    let f = Frame {
        x0,
        x1,
        y0: y0 - margin,
        y1: y1 + margin,
        left: 24.0,
        right: width as f64 - 12.0,
        top: 12.0,
        bottom: height as f64 - 24.0,
    };
    for k in 0..=5 {
        let s = k as f64 / 5.0;
        let gx = f.left + s * (f.right - f.left);
        let gy = f.top + s * (f.bottom - f.top);
        segment(&mut img, (gx, f.top), (gx, f.bottom), GRID, false);
        segment(&mut img, (f.left, gy), (f.right, gy), GRID, false);
    }
    for (a, b) in [
        ((f.left, f.top), (f.right, f.top)),
        ((f.right, f.top), (f.right, f.bottom)),
        ((f.right, f.bottom), (f.left, f.bottom)),
        ((f.left, f.bottom), (f.left, f.top)),
    ] {
        segment(&mut img, a, b, FRAME, false);
    }
    (img, f)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Polyline chart with autoscaled axes. Non-finite points are skipped.
pub fn line_chart(series: &[Series], width: u32, height: u32) -> RgbImage {
    let xs = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let ys = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let (xs, ys) = if xs.0.is_finite() { (xs, ys) } else { ((0.0, 1.0), (0.0, 1.0)) };
    let (mut img, f) = blank_frame(width, height, xs, ys);
    for s in series {
        let c = Rgb(s.color);
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| f.map(x, y))
            .collect();
        for w in pts.windows(2) {
            segment(&mut img, w[0], w[1], c, true);
        }
        if let [only] = pts.as_slice() {
            segment(&mut img, (only.0 - 2.0, only.1), (only.0 + 2.0, only.1), c, true);
        }
    }
    img
}

/// Vertical bars starting at zero.
pub fn bar_chart(bars: &[(f64, [u8; 3])], width: u32, height: u32) -> RgbImage {
    let top = bars.iter().map(|b| b.0).filter(|v| v.is_finite()).fold(0.0_f64, f64::max);
    let (mut img, f) = blank_frame(width, height, (0.0, bars.len().max(1) as f64), (0.0, top));
    for (i, &(v, color)) in bars.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        let (l, t) = f.map(i as f64 + 0.2, v);
        let (r, b) = f.map(i as f64 + 0.8, 0.0);
        for y in t.round() as u32..b.round() as u32 {
            for x in l.round() as u32..r.round() as u32 {
                put(&mut img, x as f64, y as f64, Rgb(color));
            }
        }
    }
    img
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::format("png", format!("{}: {e}", path.display())))
}

/// Writes `loss.png` and `gate.png` into `out` and returns their paths.
///
/// `loss.png` shows log10 train (solid colours) and held-out losses per epoch
/// for each run. `gate.png` shows held-out mean gate per epoch, and beneath it
/// one bar group (nominal, offset, noisy) per run.
pub fn render_plots(runs: &[Run], out: &Path) -> Result<Vec<PathBuf>> {
    let log = |v: f64| if v > 0.0 { v.log10() } else { f64::NAN };
    let curves: Vec<(Vec<(f64, f64)>, Vec<(f64, f64)>, Vec<(f64, f64)>)> = runs
        .iter()
        .map(|r| {
            let e = |m: &EpochMetrics| m.epoch as f64;
            (
                r.history.iter().map(|m| (e(m), log(m.train_loss))).collect(),
                r.history.iter().map(|m| (e(m), log(m.heldout.loss))).collect(),
                r.history.iter().map(|m| (e(m), m.heldout.mean_gate)).collect(),
            )
        })
        .collect();
    let mut loss_series = Vec::new();
    let mut gate_series = Vec::new();
    for (i, (train, heldout, gate)) in curves.iter().enumerate() {
        let c = PALETTE[(2 * i) % PALETTE.len()];
        let c2 = PALETTE[(2 * i + 1) % PALETTE.len()];
        loss_series.push(Series { points: train, color: c });
        loss_series.push(Series { points: heldout, color: c2 });
        gate_series.push(Series { points: gate, color: c });
    }
    let loss_path = out.join("loss.png");
    save_png(&line_chart(&loss_series, 640, 400), &loss_path)?;

    let gate_lines = line_chart(&gate_series, 640, 300);
    let bars: Vec<(f64, [u8; 3])> = runs
        .iter()
        .flat_map(|r| {
            let m = r.summary.by_mode;
            [
                (m.nominal.mean_gate, PALETTE[2]),
                (m.offset.mean_gate, PALETTE[1]),
                (m.noisy.mean_gate, PALETTE[3]),
            ]
        })
        .collect();
    let gate_bars = bar_chart(&bars, 640, 200);
    let mut gate = RgbImage::from_pixel(640, 500, WHITE);
    image::imageops::replace(&mut gate, &gate_lines, 0, 0);
    image::imageops::replace(&mut gate, &gate_bars, 0, 300);
    let gate_path = out.join("gate.png");
    save_png(&gate, &gate_path)?;
    Ok(vec![loss_path, gate_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(loss: f64, gate: f64) -> EvalMetrics {
        EvalMetrics {
            loss,
            imitation_mse: loss,
            reconstruction_mse: loss,
            noisy_mse: 4.0 * loss,
            mean_gate: gate,
        }
    }

    fn run(kind: RunKind, offset_steps: usize, noisy_gate: f64) -> Run {
        let history = (1..=3)
            .map(|epoch| EpochMetrics {
                epoch,
                train_loss: 1.0 / epoch as f64,
                heldout: metrics(0.01 / epoch as f64, 0.5),
            })
            .collect();
        Run {
            path: PathBuf::from("run"),
            summary: RunSummary {
                kind,
                seed: 0,
                train_steps: ModeSteps {
                    offset: offset_steps,
                    ..Default::default()
                },
                heldout_steps: 100,
                best_epoch: 3,
                initial: metrics(1.0, 0.5),
                best: metrics(0.01, 0.5),
                by_mode: ModeMetrics {
                    nominal: metrics(0.01, 0.5),
                    offset: metrics(0.01, 0.5),
                    noisy: metrics(0.01, noisy_gate),
                },
            },
            history,
        }
    }

    #[test]
    fn summary_lists_every_criterion() {
        let s = evaluate_runs(&[]);
        let ids: Vec<u8> = s.criteria.iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=9).collect::<Vec<u8>>());
        assert!(s.passed());
    }

    #[test]
    fn run_criteria() {
        let s = evaluate_runs(&[run(RunKind::Denoise, 250_000, 0.4), run(RunKind::Distill, 0, 0.5)]);
        let status: Vec<Status> = s.criteria[4..7].iter().map(|c| c.status).collect();
        assert_eq!(status, [Status::Pass; 3]);

        let s = evaluate_runs(&[run(RunKind::Denoise, 1000, 0.6)]);
        assert_eq!(s.criteria[4].status, Status::Fail);
        assert_eq!(s.criteria[5].status, Status::Fail);
        assert_eq!(s.criteria[6].status, Status::NotEvaluated);
        assert!(!s.passed());
    }

    #[test]
    fn charts_have_requested_size() {
        let pts = [(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)];
        let img = line_chart(&[Series { points: &pts, color: PALETTE[0] }], 200, 100);
        assert_eq!(img.dimensions(), (200, 100));
        assert!(img.pixels().any(|p| p.0 == PALETTE[0]));
        let bars = bar_chart(&[(1.0, PALETTE[1]), (0.5, PALETTE[2])], 120, 80);
        assert!(bars.pixels().any(|p| p.0 == PALETTE[2]));
    }
}
