//! Gait phase, clock inputs and the per-foot force/velocity gait clocks.
//!
//! Clock sign convention: `k_frc = +1` in stance and `-1` in swing, so that
//! `tanh(π F k_frc)` rewards loading a stance foot and penalizes force on a
//! swing foot; `k_vel = -k_frc` penalizes stance-foot speed and rewards
//! swing-foot speed. The left stance window is centred at `φ = s/2` for stance
//! fraction `s`; the right foot runs the same schedule half a period later.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default gait period in control steps (0.8 s at 40 Hz).
pub const DEFAULT_PERIOD: u64 = 32;
pub const CONTROL_RATE_HZ: f64 = 40.0;
pub const CONTROL_DT: f64 = 1.0 / CONTROL_RATE_HZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitPhase {
    pub t: u64,
    pub period: u64,
}

impl GaitPhase {
    pub fn new(t: u64, period: u64) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("period", "gait period must be positive"));
        }
        Ok(Self { t, period })
    }

    /// `φ = (t mod T) / T`.
    pub fn phi(&self) -> f64 {
        (self.t % self.period) as f64 / self.period as f64
    }
}

/// `(sin 2πφ, sin 2π(φ + 0.5))`.
pub fn clock_inputs(phi: f64) -> [f64; 2] {
    [(2.0 * PI * phi).sin(), (2.0 * PI * (phi + 0.5)).sin()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockShape {
    /// Fraction of the period each foot spends in stance; above 0.5 the
    /// stances overlap into double support.
    pub stance_fraction: f64,
    /// Logistic ramp width in phase units.
    pub smoothing: f64,
}

impl Default for ClockShape {
    fn default() -> Self {
        Self {
            stance_fraction: 0.55,
            smoothing: 0.03,
        }
    }
}

impl ClockShape {
    pub fn validate(&self) -> Result<()> {
        if !(self.stance_fraction > 0.5 && self.stance_fraction < 1.0) {
            return Err(Error::invalid(
                "stance_fraction",
                format!("{} must lie in (0.5, 1) so stances overlap", self.stance_fraction),
            ));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::invalid("smoothing", "must be positive"));
        }
        Ok(())
    }

    fn raw_stance(&self, d: f64) -> f64 {
        let half = 0.5 * self.stance_fraction;
        logistic((half + d) / self.smoothing) * logistic((half - d) / self.smoothing)
    }

    /// Smoothed stance indicator in [0, 1] for the left foot: exactly 1 at
    /// mid-stance, exactly 0 at mid-swing and exactly 0.5 at touchdown and
    /// lift-off.
    pub fn left_stance_level(&self, phi: f64) -> f64 {
        let center = 0.5 * self.stance_fraction;
        let d = (phi - center + 0.5).rem_euclid(1.0) - 0.5;
        let hi = self.raw_stance(0.0);
        let lo = self.raw_stance(0.5);
        let normalized = |d: f64| ((self.raw_stance(d) - lo) / (hi - lo)).clamp(0.0, 1.0);
        let gamma = 0.5f64.ln() / normalized(center).ln();
        normalized(d).powf(gamma)
    }

    pub fn in_stance(&self, phi: f64, foot: crate::state::Foot) -> bool {
        let p = match foot {
            crate::state::Foot::Left => phi,
            crate::state::Foot::Right => phi + 0.5,
        };
        self.left_stance_level(p) > 0.5
    }

    /// Phase of mid-stance for the given foot.
    pub fn mid_stance(&self, foot: crate::state::Foot) -> f64 {
        let c = 0.5 * self.stance_fraction;
        match foot {
            crate::state::Foot::Left => c,
            crate::state::Foot::Right => (c + 0.5).rem_euclid(1.0),
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitClocks {
    pub k_frc: [f64; 2],
    pub k_vel: [f64; 2],
}

fn left_frc(phi: f64, shape: &ClockShape) -> f64 {
    2.0 * shape.left_stance_level(phi) - 1.0
}

pub fn gait_clocks(phi: f64, shape: &ClockShape) -> Result<GaitClocks> {
    shape.validate()?;
    let left = left_frc(phi, shape);
    let right = left_frc((phi + 0.5).rem_euclid(1.0), shape);
    Ok(GaitClocks {
        k_frc: [left, right],
        k_vel: [-left, -right],
    })
}

/// One period of clocks sampled at `samples` evenly spaced phases, as CSV.
pub fn clock_curve_csv(shape: &ClockShape, samples: usize) -> Result<String> {
    let mut out = String::from("phi,clock_sin,clock_sin_shifted,k_frc_left,k_frc_right,k_vel_left,k_vel_right\n");
    for i in 0..samples {
        let phi = i as f64 / samples as f64;
        let c = gait_clocks(phi, shape)?;
        let inp = clock_inputs(phi);
        out.push_str(&format!(
            "{phi},{},{},{},{},{},{}\n",
            inp[0], inp[1], c.k_frc[0], c.k_frc[1], c.k_vel[0], c.k_vel[1]
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_wraps() {
        let p = GaitPhase::new(40, 32).unwrap();
        assert_eq!(p.phi(), 0.25);
        assert!(GaitPhase::new(1, 0).is_err());
    }

    #[test]
    fn clock_inputs_examples() {
        assert_eq!(clock_inputs(0.0)[0], 0.0);
        assert!(clock_inputs(0.0)[1].abs() < 1e-15);
        let q = clock_inputs(0.25);
        assert!((q[0] - 1.0).abs() < 1e-15 && (q[1] + 1.0).abs() < 1e-15);
        for i in 0..100 {
            let c = clock_inputs(i as f64 / 100.0);
            assert!((c[0] + c[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn mid_stance_and_mid_swing_levels() {
        let shape = ClockShape::default();
        let c = gait_clocks(shape.mid_stance(crate::state::Foot::Left), &shape).unwrap();
        assert!((c.k_frc[0] - 1.0).abs() < 1e-6);
        assert!((c.k_vel[0] + 1.0).abs() < 1e-6);
        // left mid-stance is right mid-swing
        assert!((c.k_frc[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn no_overlap_is_rejected() {
        let shape = ClockShape {
            stance_fraction: 0.5,
            smoothing: 0.03,
        };
        assert!(gait_clocks(0.1, &shape).is_err());
    }

    #[test]
    fn curve_csv_has_header_and_rows() {
        let csv = clock_curve_csv(&ClockShape::default(), 32).unwrap();
        assert_eq!(csv.lines().count(), 33);
    }
}
