//! Reward components and their curriculum-weighted aggregate.
//!
//! ```text
//! r = (0.25 r_frc + 0.25 r_vel + 0.2) c_r + (r_air + 0.1 r_one)(1 - c_r)
//!     + 0.2 r_v_xy + 0.2 r_ω_z + 0.05 (r_lov + r_fo + r_pm + r_po)
//!     + 0.025 (r_t + r_a)
//! ```

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::GaitClocks;
use crate::state::{ActionVector, RobotState, VelocityCommand};
use crate::terrain::CurriculumState;

/// Swing duration that breaks even in the airtime reward.
pub const AIRTIME_TARGET: f64 = 0.5;

pub fn r_frc(state: &RobotState, clocks: &GaitClocks) -> f64 {
    (PI * state.foot_force[0] * clocks.k_frc[0]).tanh() + (PI * state.foot_force[1] * clocks.k_frc[1]).tanh()
}

pub fn r_vel(state: &RobotState, clocks: &GaitClocks) -> f64 {
    (PI * state.foot_speed[0] * clocks.k_vel[0]).tanh() + (PI * state.foot_speed[1] * clocks.k_vel[1]).tanh()
}

pub fn r_air(state: &RobotState) -> f64 {
    (0..2)
        .filter(|&f| state.first_contact[f])
        .map(|f| state.airtime[f] - AIRTIME_TARGET)
        .sum()
}

pub fn r_one(state: &RobotState) -> f64 {
    if state.single_contact {
        1.0
    } else {
        0.0
    }
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

pub fn r_v_xy(state: &RobotState, cmd: &VelocityCommand) -> f64 {
    let v = state.v_xy;
    if norm2(cmd.linear) == 0.0 {
        return (-2.5 * (v[0] * v[0] + v[1] * v[1])).exp();
    }
    let dot = cmd.linear[0] * v[0] + cmd.linear[1] * v[1];
    if dot >= 1.0 {
        1.0
    } else {
        (-2.0 * (dot - 1.0).powi(2)).exp()
    }
}

pub fn r_omega_z(state: &RobotState, cmd: &VelocityCommand) -> f64 {
    let w = state.omega[2];
    if cmd.yaw_rate == 0.0 {
        return (-5.0 * w * w).exp();
    }
    let dot = cmd.yaw_rate * w;
    if dot >= 1.0 {
        1.0
    } else {
        (-2.0 * (dot - 1.0).powi(2)).exp()
    }
}

/// Planar velocity component orthogonal to the command direction; the full
/// planar velocity when the command is zero.
pub fn orthogonal_velocity(v_xy: [f64; 2], cmd: &VelocityCommand) -> [f64; 2] {
    let n = norm2(cmd.linear);
    if n == 0.0 {
        return v_xy;
    }
    let u = [cmd.linear[0] / n, cmd.linear[1] / n];
    let along = u[0] * v_xy[0] + u[1] * v_xy[1];
    [v_xy[0] - along * u[0], v_xy[1] - along * u[1]]
}

pub fn r_lov(state: &RobotState, cmd: &VelocityCommand) -> f64 {
    (-5.0 * norm2(orthogonal_velocity(state.v_xy, cmd))).exp()
}

/// Foot tilt term blended towards a constant as the terrain curriculum ramps.
/// Uses `|ẑ·ψ|` per foot so toe-down and toe-up tilts are penalized alike.
pub fn r_fo(state: &RobotState, c_t: f64) -> f64 {
    let tilt: f64 = state.foot_axes.iter().map(|a| a[2].abs()).sum();
    (-1.5 * tilt).exp() * (1.0 - c_t) + c_t
}

pub fn r_pm(state: &RobotState) -> f64 {
    (-(state.v_z.powi(2) + state.omega[1].powi(2) + state.omega[0].powi(2))).exp()
}

pub fn r_po(state: &RobotState) -> f64 {
    (-3.0 * (state.pelvis_roll.abs() + state.pelvis_pitch.abs())).exp()
}

fn mean_abs(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.map(f64::abs).sum::<f64>() / n
}

pub fn r_t(state: &RobotState) -> f64 {
    (-0.02 * mean_abs(state.torques.iter().copied())).exp()
}

pub fn r_a(action: &ActionVector, previous: &ActionVector) -> f64 {
    (-5.0 * mean_abs(action.0.iter().zip(&previous.0).map(|(a, b)| a - b))).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_frc: f64,
    pub r_vel: f64,
    pub r_air: f64,
    pub r_one: f64,
    pub r_v_xy: f64,
    pub r_omega_z: f64,
    pub r_lov: f64,
    pub r_fo: f64,
    pub r_pm: f64,
    pub r_po: f64,
    pub r_t: f64,
    pub r_a: f64,
    pub c_r: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub const CSV_HEADER: &'static str =
        "t,r_frc,r_vel,r_air,r_one,r_v_xy,r_omega_z,r_lov,r_fo,r_pm,r_po,r_t,r_a,c_r,total";

    pub fn components(&self) -> [(&'static str, f64); 12] {
        [
            ("r_frc", self.r_frc),
            ("r_vel", self.r_vel),
            ("r_air", self.r_air),
            ("r_one", self.r_one),
            ("r_v_xy", self.r_v_xy),
            ("r_omega_z", self.r_omega_z),
            ("r_lov", self.r_lov),
            ("r_fo", self.r_fo),
            ("r_pm", self.r_pm),
            ("r_po", self.r_po),
            ("r_t", self.r_t),
            ("r_a", self.r_a),
        ]
    }

    /// The aggregate formula applied to this breakdown's components.
    pub fn weighted_sum(&self) -> f64 {
        let c_r = self.c_r;
        (0.25 * self.r_frc + 0.25 * self.r_vel + 0.2) * c_r
            + (self.r_air + 0.1 * self.r_one) * (1.0 - c_r)
            + 0.2 * self.r_v_xy
            + 0.2 * self.r_omega_z
            + 0.05 * self.r_lov
            + 0.05 * self.r_fo
            + 0.05 * self.r_pm
            + 0.05 * self.r_po
            + 0.025 * self.r_t
            + 0.025 * self.r_a
    }

    pub fn csv_row(&self, t: usize) -> String {
        let mut row = t.to_string();
        for (_, v) in self.components() {
            row.push_str(&format!(",{v:e}"));
        }
        row.push_str(&format!(",{:e},{:e}", self.c_r, self.total));
        row
    }
}

pub fn total_reward(
    state: &RobotState,
    cmd: &VelocityCommand,
    clocks: &GaitClocks,
    action: &ActionVector,
    previous: &ActionVector,
    curriculum: &CurriculumState,
) -> Result<RewardBreakdown> {
    let mut b = RewardBreakdown {
        r_frc: r_frc(state, clocks),
        r_vel: r_vel(state, clocks),
        r_air: r_air(state),
        r_one: r_one(state),
        r_v_xy: r_v_xy(state, cmd),
        r_omega_z: r_omega_z(state, cmd),
        r_lov: r_lov(state, cmd),
        r_fo: r_fo(state, curriculum.c_t),
        r_pm: r_pm(state),
        r_po: r_po(state),
        r_t: r_t(state),
        r_a: r_a(action, previous),
        c_r: curriculum.c_r,
        total: 0.0,
    };
    if let Some((name, _)) = b.components().iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite((*name).to_string()));
    }
    b.total = b.weighted_sum();
    if !b.total.is_finite() {
        return Err(Error::NonFinite("total".into()));
    }
    Ok(b)
}

pub fn write_csv<W: Write>(mut w: W, rows: &[RewardBreakdown]) -> Result<()> {
    writeln!(w, "{}", RewardBreakdown::CSV_HEADER)?;
    for (t, r) in rows.iter().enumerate() {
        writeln!(w, "{}", r.csv_row(t))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clocks(l: f64, r: f64) -> GaitClocks {
        GaitClocks {
            k_frc: [l, r],
            k_vel: [-l, -r],
        }
    }

    #[test]
    fn force_term_examples() {
        let mut s = RobotState::default();
        assert_eq!(r_frc(&s, &clocks(1.0, -1.0)), 0.0);
        s.foot_force = [1.0, 0.0];
        assert!((r_frc(&s, &clocks(-1.0, 1.0)) - (-PI).tanh()).abs() < 1e-12);
        s.foot_force = [1.0, 1.0];
        assert!(r_frc(&s, &clocks(1.0, -1.0)).abs() < 1e-15);
    }

    #[test]
    fn airtime_examples() {
        let mut s = RobotState::default();
        s.airtime = [0.8, 0.3];
        assert_eq!(r_air(&s), 0.0);
        s.first_contact = [true, false];
        assert!((r_air(&s) - 0.3).abs() < 1e-12);
        s.airtime = [0.4, 0.4];
        s.first_contact = [true, true];
        assert!((r_air(&s) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn non_finite_component_is_named() {
        let mut s = RobotState::default();
        s.torques[0] = f64::NAN;
        let err = total_reward(
            &s,
            &VelocityCommand::ZERO,
            &clocks(1.0, -1.0),
            &ActionVector::zeros(),
            &ActionVector::zeros(),
            &CurriculumState::fixed(0.0, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref n) if n == "r_t"), "{err}");
    }
}
