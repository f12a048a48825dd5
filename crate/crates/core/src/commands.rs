//! Velocity command randomization.
//!
//! The default table's raw weights (0.15, 0.42, 0.07, 0.025, 0.1) sum to 0.765;
//! they are kept as relative weights and renormalized on construction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::VelocityCommand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSpec {
    Constant(f64),
    /// `±value`, sign chosen uniformly.
    PlusMinus(f64),
    Uniform { low: f64, high: f64 },
}

impl AxisSpec {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AxisSpec::Constant(v) => v,
            AxisSpec::PlusMinus(v) => {
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            }
            AxisSpec::Uniform { low, high } => rng.random_range(low..high),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            AxisSpec::Constant(v) | AxisSpec::PlusMinus(v) if !v.is_finite() => {
                Err(Error::NonFinite("command axis".into()))
            }
            AxisSpec::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                Err(Error::invalid("command axis", "uniform bounds must satisfy low < high"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandRow {
    pub v_x: AxisSpec,
    pub v_y: AxisSpec,
    pub yaw_rate: AxisSpec,
    /// Relative weight as written in the table.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CommandRow>", into = "Vec<CommandRow>")]
pub struct CommandDistribution {
    rows: Vec<CommandRow>,
    probabilities: Vec<f64>,
}

impl TryFrom<Vec<CommandRow>> for CommandDistribution {
    type Error = Error;

    fn try_from(rows: Vec<CommandRow>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<CommandDistribution> for Vec<CommandRow> {
    fn from(d: CommandDistribution) -> Self {
        d.rows
    }
}

impl Default for CommandDistribution {
    fn default() -> Self {
        use AxisSpec::*;
        let u = Uniform { low: -1.0, high: 1.0 };
        Self::new(vec![
            CommandRow { v_x: Constant(0.0), v_y: Constant(0.0), yaw_rate: Constant(0.0), weight: 0.15 },
            CommandRow { v_x: PlusMinus(1.0), v_y: Constant(0.0), yaw_rate: Constant(0.0), weight: 0.42 },
            CommandRow { v_x: Constant(0.0), v_y: PlusMinus(1.0), yaw_rate: Constant(0.0), weight: 0.07 },
            CommandRow { v_x: Constant(0.0), v_y: Constant(0.0), yaw_rate: PlusMinus(1.0), weight: 0.025 },
            CommandRow { v_x: u, v_y: u, yaw_rate: u, weight: 0.1 },
        ])
        .expect("default table is valid")
    }
}

impl CommandDistribution {
    pub fn new(rows: Vec<CommandRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("command distribution", "no rows"));
        }
        for row in &rows {
            if !(row.weight > 0.0 && row.weight.is_finite()) {
                return Err(Error::invalid("command distribution", "row weights must be positive"));
            }
            row.v_x.validate()?;
            row.v_y.validate()?;
            row.yaw_rate.validate()?;
        }
        let total: f64 = rows.iter().map(|r| r.weight).sum();
        let probabilities = rows.iter().map(|r| r.weight / total).collect();
        Ok(Self { rows, probabilities })
    }

    pub fn rows(&self) -> &[CommandRow] {
        &self.rows
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.rows.len() - 1
    }

    /// Returns the chosen row index along with the command.
    pub fn sample_with_row<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, VelocityCommand) {
        let i = self.sample_row(rng);
        let row = &self.rows[i];
        let v_x = row.v_x.sample(rng);
        let v_y = row.v_y.sample(rng);
        let w = row.yaw_rate.sample(rng);
        (i, VelocityCommand::new(v_x, v_y, w))
    }
}

pub fn sample_command<R: Rng + ?Sized>(dist: &CommandDistribution, rng: &mut R) -> VelocityCommand {
    dist.sample_with_row(rng).1
}

/// Uniform step in `[1, episode_length - 1]`; `None` for episodes shorter than two steps.
pub fn schedule_resample<R: Rng + ?Sized>(episode_length: usize, rng: &mut R) -> Option<usize> {
    if episode_length < 2 {
        return None;
    }
    Some(rng.random_range(1..episode_length))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn default_table_renormalizes() {
        let d = CommandDistribution::default();
        let total: f64 = d.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((d.probabilities()[0] - 0.15 / 0.765).abs() < 1e-12);
        assert!((d.rows().iter().map(|r| r.weight).sum::<f64>() - 0.765).abs() < 1e-12);
    }

    #[test]
    fn rows_produce_their_shapes() {
        let d = CommandDistribution::default();
        let mut rng = rng_from(&[1]);
        let mut signs = [false; 2];
        for _ in 0..2000 {
            let (row, c) = d.sample_with_row(&mut rng);
            match row {
                0 => assert_eq!(c, VelocityCommand::ZERO),
                1 => {
                    assert_eq!((c.linear[1], c.yaw_rate), (0.0, 0.0));
                    assert_eq!(c.linear[0].abs(), 1.0);
                    signs[(c.linear[0] > 0.0) as usize] = true;
                }
                _ => {}
            }
        }
        assert_eq!(signs, [true, true]);
    }

    #[test]
    fn resample_range() {
        let mut rng = rng_from(&[2]);
        assert_eq!(schedule_resample(1, &mut rng), None);
        for _ in 0..50 {
            assert_eq!(schedule_resample(2, &mut rng), Some(1));
            let s = schedule_resample(300, &mut rng).unwrap();
            assert!((1..300).contains(&s));
        }
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(CommandDistribution::new(vec![]).is_err());
        let mut rows = CommandDistribution::default().rows().to_vec();
        rows[0].weight = 0.0;
        assert!(CommandDistribution::new(rows).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let d = CommandDistribution::default();
        let json = serde_json::to_string(&d).unwrap();
        let back: CommandDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
