use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sequence_loss, student_loss, ArchConfig, LossParts, LossWeights, Sequence, StudentPolicy};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Parameters};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudentTrainConfig {
    pub arch: ArchConfig,
    pub learning_rate: f64,
    pub batch_sequences: usize,
    pub epochs: usize,
    pub max_episode_length: usize,
    pub loss: LossWeights,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Keep the extero encoder fixed (e.g. after loading teacher weights).
    pub freeze_encoder: bool,
}

impl Default for StudentTrainConfig {
    fn default() -> Self {
        Self {
            arch: ArchConfig::desk(),
            learning_rate: 1e-3,
            batch_sequences: 12,
            epochs: 100,
            max_episode_length: 300,
            loss: LossWeights::default(),
            seed: 0,
            clip_norm: Some(1.0),
            freeze_encoder: false,
        }
    }
}

impl StudentTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        for (name, v) in [
            ("batch_sequences", self.batch_sequences),
            ("epochs", self.epochs),
            ("max_episode_length", self.max_episode_length),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        let w = self.loss;
        if !(w.imitation >= 0.0 && w.reconstruction >= 0.0 && w.imitation + w.reconstruction > 0.0) {
            return Err(Error::invalid("loss", "weights must be non-negative and not both zero"));
        }
        if !(w.gate >= 0.0 && w.gate.is_finite()) {
            return Err(Error::invalid("loss.gate", "must be non-negative"));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::invalid("clip_norm", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<Sequence>,
    pub heldout: Vec<Sequence>,
}

impl Dataset {
    pub fn steps(&self) -> (usize, usize) {
        let count = |v: &[Sequence]| v.iter().map(Sequence::len).sum();
        (count(&self.train), count(&self.heldout))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub loss: f64,
    pub imitation_mse: f64,
    pub reconstruction_mse: f64,
    /// MSE of the raw noisy samples against the clean ones.
    pub noisy_mse: f64,
    pub mean_gate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout: EvalMetrics,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,heldout_loss,heldout_imitation_mse,heldout_reconstruction_mse,heldout_noisy_mse,heldout_mean_gate";

    pub fn csv_row(&self) -> String {
        let h = &self.heldout;
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.epoch, self.train_loss, h.loss, h.imitation_mse, h.reconstruction_mse, h.noisy_mse, h.mean_gate
        )
    }

    pub fn write_csv<W: Write>(mut w: W, rows: &[EpochMetrics]) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in rows {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Vec<EpochMetrics>> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(Error::format("metrics csv", "unexpected header"));
        }
        lines
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                let cols: Vec<&str> = line.split(',').collect();
                let bad = || Error::format("metrics csv", format!("row {} is malformed", i + 1));
                if cols.len() != 7 {
                    return Err(bad());
                }
                let f = |k: usize| cols[k].trim().parse::<f64>().map_err(|_| bad());
                Ok(EpochMetrics {
                    epoch: cols[0].trim().parse().map_err(|_| bad())?,
                    train_loss: f(1)?,
                    heldout: EvalMetrics {
                        loss: f(2)?,
                        imitation_mse: f(3)?,
                        reconstruction_mse: f(4)?,
                        noisy_mse: f(5)?,
                        mean_gate: f(6)?,
                    },
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest held-out loss.
    pub best: StudentPolicy,
    pub best_epoch: usize,
    pub last: StudentPolicy,
    pub initial: EvalMetrics,
    pub history: Vec<EpochMetrics>,
}

fn noisy_mse(seq: &Sequence) -> f64 {
    let sse: f64 = seq.noisy.iter().zip(&seq.clean).map(|(n, c)| (n - c) * (n - c)).sum();
    sse / seq.noisy.len() as f64
}

/// Held-out metrics, averaged per step across all sequences.
pub fn evaluate(policy: &StudentPolicy, sequences: &[Sequence], weights: &LossWeights) -> Result<EvalMetrics> {
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results: Vec<Result<(LossParts, f64)>> = sequences
        .par_iter()
        .map(|s| Ok((sequence_loss(policy, s, weights, 0.0, None)?, noisy_mse(s) * s.len() as f64)))
        .collect();
    let mut parts = LossParts::default();
    let mut noisy = 0.0;
    for r in results {
        let (p, n) = r?;
        parts.merge(&p);
        noisy += n;
    }
    Ok(EvalMetrics {
        loss: parts.total(weights),
        imitation_mse: parts.imitation_mse(),
        reconstruction_mse: parts.reconstruction_mse(),
        noisy_mse: noisy / parts.steps as f64,
        mean_gate: parts.mean_gate(),
    })
}

/// Trains a freshly initialized student (seeded from `config.seed`).
pub fn train_student(dataset: &Dataset, config: &StudentTrainConfig) -> Result<TrainOutcome> {
    let policy = StudentPolicy::seeded(&config.arch, config.seed)?;
    train_student_from(policy, dataset, config, |_, _| {})
}

/// Trains `policy` in place of a fresh one, reporting each epoch to `on_epoch`.
pub fn train_student_from(
    policy: StudentPolicy,
    dataset: &Dataset,
    config: &StudentTrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics, &StudentPolicy),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.train.is_empty() || dataset.heldout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let clip = |s: &Sequence| s.truncated(config.max_episode_length);
    let train: Vec<Sequence> = dataset.train.iter().map(clip).collect();
    let heldout: Vec<Sequence> = dataset.heldout.iter().map(clip).collect();

    let mut policy = policy;
    let mut opt = Adam::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..Default::default()
        },
        &policy,
    );
    let initial = evaluate(&policy, &heldout, &config.loss)?;
    let mut best = (policy.clone(), 0usize, f64::INFINITY);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng_from(&[config.seed, epoch as u64, 0xE90C]));
        let mut epoch_parts = LossParts::default();
        for chunk in order.chunks(config.batch_sequences) {
            let batch: Vec<Sequence> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (_, parts, mut grad) = student_loss(&policy, &batch, &config.loss)?;
            epoch_parts.merge(&parts);
            if config.freeze_encoder {
                grad.encoder.fill(0.0);
            }
            if let Some(max_norm) = config.clip_norm {
                let norm = grad.to_flat().iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    grad.scale(max_norm / norm);
                }
            }
            opt.update(&mut policy, &grad)?;
        }
        let heldout_metrics = evaluate(&policy, &heldout, &config.loss)?;
        if !heldout_metrics.loss.is_finite() {
            return Err(Error::NonFinite(format!("held-out loss at epoch {epoch}")));
        }
        if heldout_metrics.loss < best.2 {
            best = (policy.clone(), epoch, heldout_metrics.loss);
        }
        let row = EpochMetrics {
            epoch,
            train_loss: epoch_parts.total(&config.loss),
            heldout: heldout_metrics,
        };
        on_epoch(&row, &policy);
        history.push(row);
    }
    Ok(TrainOutcome {
        best: best.0,
        best_epoch: best.1,
        last: policy,
        initial,
        history,
    })
}
