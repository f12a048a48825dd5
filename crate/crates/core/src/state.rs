//! Observation, action and robot-state types shared by every other module.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

pub const MOTOR_COUNT: usize = 10;
pub const JOINT_COUNT: usize = 4;
pub const ACTION_DIM: usize = MOTOR_COUNT;
pub const PROPRIO_DIM: usize = 44;

/// Index ranges of each block inside the flattened proprioceptive vector.
pub mod layout {
    use std::ops::Range;

    pub const MOTOR_POSITIONS: Range<usize> = 0..10;
    pub const MOTOR_VELOCITIES: Range<usize> = 10..20;
    pub const JOINT_POSITIONS: Range<usize> = 20..24;
    pub const JOINT_VELOCITIES: Range<usize> = 24..28;
    pub const PELVIS_ORIENTATION: Range<usize> = 28..32;
    pub const PELVIS_ANGULAR_VELOCITY: Range<usize> = 32..35;
    pub const COMMAND: Range<usize> = 35..38;
    /// The named fields sum to 40 scalars; these four slots are held at zero.
    pub const PADDING: Range<usize> = 38..42;
    pub const CLOCK: Range<usize> = 42..44;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub const BOTH: [Foot; 2] = [Foot::Left, Foot::Right];

    pub fn index(self) -> usize {
        match self {
            Foot::Left => 0,
            Foot::Right => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Foot::Left => 1.0,
            Foot::Right => -1.0,
        }
    }
}

/// Commanded planar velocity (m/s, heading frame) and yaw rate (rad/s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub linear: [f64; 2],
    pub yaw_rate: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand {
        linear: [0.0, 0.0],
        yaw_rate: 0.0,
    };

    pub fn new(v_x: f64, v_y: f64, yaw_rate: f64) -> Self {
        Self {
            linear: [v_x, v_y],
            yaw_rate,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.linear[0], self.linear[1], self.yaw_rate]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(pub [f64; ACTION_DIM]);

impl ActionVector {
    pub fn zeros() -> Self {
        Self([0.0; ACTION_DIM])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; ACTION_DIM] = values
            .try_into()
            .map_err(|_| Error::shape("action vector", ACTION_DIM, values.len()))?;
        let action = Self(arr);
        action.validate()?;
        Ok(action)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("pd_targets", &self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProprioObservation {
    pub motor_positions: [f64; MOTOR_COUNT],
    pub motor_velocities: [f64; MOTOR_COUNT],
    pub joint_positions: [f64; JOINT_COUNT],
    pub joint_velocities: [f64; JOINT_COUNT],
    /// Unit quaternion `(w, x, y, z)`.
    pub pelvis_orientation: [f64; 4],
    pub pelvis_angular_velocity: [f64; 3],
    pub command: VelocityCommand,
    pub clock: [f64; 2],
}

impl Default for ProprioObservation {
    fn default() -> Self {
        Self {
            motor_positions: [0.0; MOTOR_COUNT],
            motor_velocities: [0.0; MOTOR_COUNT],
            joint_positions: [0.0; JOINT_COUNT],
            joint_velocities: [0.0; JOINT_COUNT],
            pelvis_orientation: [1.0, 0.0, 0.0, 0.0],
            pelvis_angular_velocity: [0.0; 3],
            command: VelocityCommand::ZERO,
            clock: [0.0; 2],
        }
    }
}

impl ProprioObservation {
    pub fn validate(&self) -> Result<()> {
        check_finite("motor_positions", &self.motor_positions)?;
        check_finite("motor_velocities", &self.motor_velocities)?;
        check_finite("joint_positions", &self.joint_positions)?;
        check_finite("joint_velocities", &self.joint_velocities)?;
        check_finite("pelvis_orientation", &self.pelvis_orientation)?;
        check_finite("pelvis_angular_velocity", &self.pelvis_angular_velocity)?;
        check_finite("command", &self.command.as_array())?;
        check_finite("clock", &self.clock)?;
        let norm = self.pelvis_orientation.iter().map(|q| q * q).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "pelvis_orientation",
                format!("quaternion norm {norm} is not 1"),
            ));
        }
        if self.clock.iter().any(|c| c.abs() > 1.0) {
            return Err(Error::invalid("clock", "entries must lie in [-1, 1]"));
        }
        Ok(())
    }

    /// Flattens into the fixed 44-slot layout described by [`layout`].
    pub fn flatten(&self) -> Result<[f64; PROPRIO_DIM]> {
        self.validate()?;
        let mut out = [0.0; PROPRIO_DIM];
        out[layout::MOTOR_POSITIONS].copy_from_slice(&self.motor_positions);
        out[layout::MOTOR_VELOCITIES].copy_from_slice(&self.motor_velocities);
        out[layout::JOINT_POSITIONS].copy_from_slice(&self.joint_positions);
        out[layout::JOINT_VELOCITIES].copy_from_slice(&self.joint_velocities);
        out[layout::PELVIS_ORIENTATION].copy_from_slice(&self.pelvis_orientation);
        out[layout::PELVIS_ANGULAR_VELOCITY].copy_from_slice(&self.pelvis_angular_velocity);
        out[layout::COMMAND].copy_from_slice(&self.command.as_array());
        out[layout::CLOCK].copy_from_slice(&self.clock);
        Ok(out)
    }

    pub fn unflatten(values: &[f64]) -> Result<Self> {
        if values.len() != PROPRIO_DIM {
            return Err(Error::shape("proprioceptive vector", PROPRIO_DIM, values.len()));
        }
        if values[layout::PADDING].iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("padding", "reserved slots must be zero"));
        }
        let block = |r: std::ops::Range<usize>| &values[r];
        let cmd = block(layout::COMMAND);
        let obs = Self {
            motor_positions: block(layout::MOTOR_POSITIONS).try_into().unwrap(),
            motor_velocities: block(layout::MOTOR_VELOCITIES).try_into().unwrap(),
            joint_positions: block(layout::JOINT_POSITIONS).try_into().unwrap(),
            joint_velocities: block(layout::JOINT_VELOCITIES).try_into().unwrap(),
            pelvis_orientation: block(layout::PELVIS_ORIENTATION).try_into().unwrap(),
            pelvis_angular_velocity: block(layout::PELVIS_ANGULAR_VELOCITY).try_into().unwrap(),
            command: VelocityCommand::new(cmd[0], cmd[1], cmd[2]),
            clock: block(layout::CLOCK).try_into().unwrap(),
        };
        obs.validate()?;
        Ok(obs)
    }
}

/// Quaternion `(w, x, y, z)` from roll, pitch and yaw (ZYX convention).
pub fn quaternion_from_euler(roll: f64, pitch: f64, yaw: f64) -> [f64; 4] {
    let (sr, cr) = (roll * 0.5).sin_cos();
    let (sp, cp) = (pitch * 0.5).sin_cos();
    let (sy, cy) = (yaw * 0.5).sin_cos();
    let q = [
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ];
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

/// Per-timestep physical quantities consumed by the reward terms.
///
/// Two-element arrays are indexed by [`Foot::index`]. Planar pelvis velocity is
/// expressed in the heading frame so it compares directly with the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Foot force norms normalized to [0, 1].
    pub foot_force: [f64; 2],
    /// Foot speed norms normalized to [0, 1].
    pub foot_speed: [f64; 2],
    pub v_xy: [f64; 2],
    pub v_z: f64,
    /// Pelvis angular velocity `(ω_x, ω_y, ω_z)`.
    pub omega: [f64; 3],
    pub pelvis_roll: f64,
    pub pelvis_pitch: f64,
    pub pelvis_yaw: f64,
    /// Unit vectors along the length of each foot.
    pub foot_axes: [[f64; 3]; 2],
    /// Accumulated swing time; at a first-contact step it holds the completed swing.
    pub airtime: [f64; 2],
    pub first_contact: [bool; 2],
    pub single_contact: bool,
    pub torques: [f64; MOTOR_COUNT],
    pub foot_positions: [[f64; 2]; 2],
}

impl Default for RobotState {
    fn default() -> Self {
        Self {
            foot_force: [0.0; 2],
            foot_speed: [0.0; 2],
            v_xy: [0.0; 2],
            v_z: 0.0,
            omega: [0.0; 3],
            pelvis_roll: 0.0,
            pelvis_pitch: 0.0,
            pelvis_yaw: 0.0,
            foot_axes: [[1.0, 0.0, 0.0]; 2],
            airtime: [0.0; 2],
            first_contact: [false; 2],
            single_contact: false,
            torques: [0.0; MOTOR_COUNT],
            foot_positions: [[0.0; 2]; 2],
        }
    }
}

impl RobotState {
    pub fn validate(&self) -> Result<()> {
        check_finite("foot_force", &self.foot_force)?;
        check_finite("foot_speed", &self.foot_speed)?;
        check_finite("v_xy", &self.v_xy)?;
        check_finite("v_z", &[self.v_z])?;
        check_finite("omega", &self.omega)?;
        check_finite("pelvis_orientation", &[self.pelvis_roll, self.pelvis_pitch, self.pelvis_yaw])?;
        check_finite("airtime", &self.airtime)?;
        check_finite("torques", &self.torques)?;
        check_finite("foot_positions", self.foot_positions.as_flattened())?;
        for (name, values) in [("foot_force", self.foot_force), ("foot_speed", self.foot_speed)] {
            if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid(name, "normalized norms must lie in [0, 1]"));
            }
        }
        for axis in &self.foot_axes {
            check_finite("foot_axes", axis)?;
            let n = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("foot_axes", format!("axis norm {n} is not 1")));
            }
        }
        if self.airtime.iter().any(|&t| t < 0.0) {
            return Err(Error::invalid("airtime", "must be non-negative"));
        }
        Ok(())
    }
}

/// Writes one JSON document per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut writer: W, records: impl IntoIterator<Item = T>) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_obs() -> ProprioObservation {
        let mut obs = ProprioObservation::default();
        for (i, v) in obs.motor_positions.iter_mut().enumerate() {
            *v = 0.1 * i as f64;
        }
        obs.pelvis_orientation = quaternion_from_euler(0.05, -0.02, 1.3);
        obs.command = VelocityCommand::new(0.4, -0.2, 0.7);
        obs.clock = [0.5, -0.5];
        obs
    }

    #[test]
    fn zero_observation_has_single_unit_entry() {
        let flat = ProprioObservation::default().flatten().unwrap();
        assert_eq!(flat.len(), PROPRIO_DIM);
        assert_eq!(flat.iter().filter(|&&v| v == 0.0).count(), 43);
        assert_eq!(flat[layout::PELVIS_ORIENTATION.start], 1.0);
    }

    #[test]
    fn command_lands_in_command_slots() {
        let mut obs = ProprioObservation::default();
        obs.command = VelocityCommand::new(1.0, 0.0, 0.0);
        let flat = obs.flatten().unwrap();
        assert_eq!(&flat[layout::COMMAND], &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn unflatten_round_trips() {
        let obs = sample_obs();
        let back = ProprioObservation::unflatten(&obs.flatten().unwrap()).unwrap();
        assert_eq!(obs, back);
    }

    #[test]
    fn rejects_non_finite_field_by_name() {
        let mut obs = sample_obs();
        obs.joint_velocities[2] = f64::NAN;
        match obs.flatten() {
            Err(Error::NonFinite(name)) => assert_eq!(name, "joint_velocities"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_quaternion_and_clock() {
        let mut obs = sample_obs();
        obs.pelvis_orientation = [1.0, 0.1, 0.0, 0.0];
        assert!(obs.flatten().is_err());
        let mut obs = sample_obs();
        obs.clock = [1.5, 0.0];
        assert!(obs.flatten().is_err());
    }

    #[test]
    fn action_vector_shape_and_finiteness() {
        assert!(ActionVector::from_slice(&[0.0; 9]).is_err());
        let mut v = [0.0; 10];
        v[3] = f64::INFINITY;
        assert!(ActionVector::from_slice(&v).is_err());
        assert!(ActionVector::from_slice(&[0.2; 10]).is_ok());
    }

    #[test]
    fn robot_state_invariants() {
        let mut s = RobotState::default();
        assert!(s.validate().is_ok());
        s.foot_force[0] = 1.2;
        assert!(s.validate().is_err());
        let mut s = RobotState::default();
        s.foot_axes[1] = [1.0, 1.0, 0.0];
        assert!(s.validate().is_err());
        let mut s = RobotState::default();
        s.airtime[0] = -0.1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let states = vec![RobotState::default(), RobotState { v_z: 0.25, ..Default::default() }];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &states).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 2);
        let back: Vec<RobotState> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, states);
    }
}
