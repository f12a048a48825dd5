//! Kinematic gait trajectories over a height field.
//!
//! The pelvis integrates the velocity command in its heading frame. Feet follow
//! the gait-clock schedule: a stance foot is pinned to the terrain, and a swing
//! foot travels on a smoothstep path towards the place it should occupy at the
//! middle of its next stance, lifted by a half-sine arc. Forces, speeds,
//! airtime and contact flags are read off this schedule, and the
//! proprioceptive vector is derived from the foot and pelvis poses. There are
//! no dynamics here.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{clock_inputs, ClockShape, GaitPhase, CONTROL_DT, DEFAULT_PERIOD};
use crate::rng::rng_from;
use crate::state::{quaternion_from_euler, Foot, ProprioObservation, RobotState, VelocityCommand, MOTOR_COUNT};
use crate::terrain::HeightField;

pub const MAX_STEPS: usize = 300;
/// Foot speed that maps to a normalized speed of 1.
pub const FOOT_SPEED_NORM: f64 = 2.0;
const THIGH_SHIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandChange {
    pub step: usize,
    pub command: VelocityCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkSpec {
    pub command: VelocityCommand,
    pub command_change: Option<CommandChange>,
    pub period: u64,
    pub clock: ClockShape,
    /// Lateral hip offset of each foot from the pelvis centre (m).
    pub half_width: f64,
    /// Peak swing height above the straight-line path (m).
    pub clearance: f64,
    pub pelvis_height: f64,
    pub start_xy: [f64; 2],
    pub start_yaw: f64,
    pub steps: usize,
    pub seed: u64,
    pub stance_force: f64,
    pub force_sigma: f64,
    pub torque_sigma: f64,
}

impl Default for WalkSpec {
    fn default() -> Self {
        Self {
            command: VelocityCommand::ZERO,
            command_change: None,
            period: DEFAULT_PERIOD,
            clock: ClockShape::default(),
            half_width: 0.135,
            clearance: 0.15,
            pelvis_height: 0.9,
            start_xy: [0.0, 0.0],
            start_yaw: 0.0,
            steps: MAX_STEPS,
            seed: 0,
            stance_force: 0.5,
            force_sigma: 0.03,
            torque_sigma: 2.0,
        }
    }
}

impl WalkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.steps > MAX_STEPS {
            return Err(Error::invalid("steps", format!("{} must lie in [1, {MAX_STEPS}]", self.steps)));
        }
        if self.period < 2 {
            return Err(Error::invalid("period", "gait period must be at least two steps"));
        }
        self.clock.validate()?;
        let nonneg = [
            ("half_width", self.half_width),
            ("clearance", self.clearance),
            ("pelvis_height", self.pelvis_height),
            ("force_sigma", self.force_sigma),
            ("torque_sigma", self.torque_sigma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and non-negative"));
            }
        }
        crate::error::check_range("stance_force", self.stance_force, 0.0, 1.0)?;
        crate::error::check_finite("start pose", &[self.start_xy[0], self.start_xy[1], self.start_yaw])?;
        crate::error::check_finite("command", &self.command.as_array())?;
        Ok(())
    }

    pub fn command_at(&self, t: usize) -> VelocityCommand {
        match self.command_change {
            Some(c) if t >= c.step => c.command,
            _ => self.command,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkStep {
    pub t: usize,
    pub phi: f64,
    pub command: VelocityCommand,
    pub in_stance: [bool; 2],
    pub state: RobotState,
    pub proprio: ProprioObservation,
    /// World-frame foot positions `(x, y, z)`.
    pub feet: [[f64; 3]; 2],
    /// Pelvis `(x, y, z)`.
    pub pelvis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<WalkStep>,
    /// Set when the walk left the height field before `spec.steps`.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    x: f64,
    y: f64,
    yaw: f64,
}

impl Pose {
    fn advance(self, cmd: &VelocityCommand, dt: f64) -> Pose {
        let mid = self.yaw + 0.5 * cmd.yaw_rate * dt;
        let (s, c) = mid.sin_cos();
        let [vx, vy] = cmd.linear;
        Pose {
            x: self.x + (c * vx - s * vy) * dt,
            y: self.y + (s * vx + c * vy) * dt,
            yaw: self.yaw + cmd.yaw_rate * dt,
        }
    }

    fn foot_home(self, foot: Foot, half_width: f64) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let lateral = foot.sign() * half_width;
        [self.x - s * lateral, self.y + c * lateral]
    }
}

#[derive(Debug, Clone, Copy)]
struct Swing {
    start: [f64; 3],
    target: [f64; 3],
    start_yaw: f64,
    target_yaw: f64,
    len: usize,
    done: usize,
}

#[derive(Debug, Clone, Copy)]
struct FootTrack {
    pos: [f64; 3],
    yaw: f64,
    swing: Option<Swing>,
    air: f64,
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Rolls out a trajectory of at most `spec.steps` control steps.
pub fn roll_trajectory(spec: &WalkSpec, field: &HeightField) -> Result<Trajectory> {
    spec.validate()?;
    let dt = CONTROL_DT;
    let period = spec.period;
    let stance_at = |t: usize, foot: Foot| -> bool {
        let phi = GaitPhase { t: t as u64, period }.phi();
        spec.clock.in_stance(phi, foot)
    };
    let mut rng = rng_from(&[spec.seed, 0x5A1C_4A1E]);

    let mut pose = Pose {
        x: spec.start_xy[0],
        y: spec.start_xy[1],
        yaw: spec.start_yaw,
    };
    let mut tracks = Foot::BOTH.map(|foot| {
        let [x, y] = pose.foot_home(foot, spec.half_width);
        FootTrack {
            pos: [x, y, field.height_at(x, y)],
            yaw: pose.yaw,
            swing: None,
            air: 0.0,
        }
    });
    let mut was_stance = [true; 2];
    let mut pelvis_z = tracks.iter().map(|f| f.pos[2]).sum::<f64>() / 2.0 + spec.pelvis_height;
    let mut steps: Vec<WalkStep> = Vec::with_capacity(spec.steps);
    let mut truncated = false;

    for t in 0..spec.steps {
        let cmd = spec.command_at(t);
        let phase = GaitPhase { t: t as u64, period };
        let phi = phase.phi();
        let mut state = RobotState::default();
        let mut in_stance = [false; 2];

        for foot in Foot::BOTH {
            let i = foot.index();
            let track = &mut tracks[i];
            let old = track.pos;
            let stance = stance_at(t, foot);
            in_stance[i] = stance;
            if stance {
                if let Some(sw) = track.swing.take() {
                    track.pos = sw.target;
                    track.yaw = sw.target_yaw;
                }
                if !was_stance[i] {
                    state.first_contact[i] = true;
                    state.airtime[i] = track.air;
                }
                track.air = 0.0;
                state.foot_force[i] = (spec.stance_force + spec.force_sigma * rng.sample::<f64, _>(StandardNormal))
                    .clamp(0.0, 1.0);
            } else {
                if track.swing.is_none() {
                    let len = (t..t + period as usize).take_while(|&k| !stance_at(k, foot)).count();
                    let stance_len = period as usize - len;
                    let ahead = len + stance_len / 2;
                    let mut future = pose;
                    for _ in 0..ahead {
                        future = future.advance(&cmd, dt);
                    }
                    let [x, y] = future.foot_home(foot, spec.half_width);
                    track.swing = Some(Swing {
                        start: track.pos,
                        target: [x, y, field.height_at(x, y)],
                        start_yaw: track.yaw,
                        target_yaw: future.yaw,
                        len,
                        done: 0,
                    });
                }
                let sw = track.swing.as_mut().unwrap();
                sw.done += 1;
                let u = sw.done as f64 / (sw.len + 1) as f64;
                let s = smoothstep(u);
                let lerp = |a: f64, b: f64, w: f64| a + (b - a) * w;
                track.pos = [
                    lerp(sw.start[0], sw.target[0], s),
                    lerp(sw.start[1], sw.target[1], s),
                    lerp(sw.start[2], sw.target[2], u) + spec.clearance * (PI * u).sin(),
                ];
                track.yaw = sw.start_yaw + wrap_angle(sw.target_yaw - sw.start_yaw) * s;
                track.air += dt;
                let tilt = 0.3 * (PI * u).sin();
                let (sy, cy) = track.yaw.sin_cos();
                state.foot_axes[i] = [tilt.cos() * cy, tilt.cos() * sy, tilt.sin()];
            }
            if stance {
                let (sy, cy) = track.yaw.sin_cos();
                state.foot_axes[i] = [cy, sy, 0.0];
                state.foot_speed[i] = 0.0;
            } else {
                let d = (0..3).map(|k| (track.pos[k] - old[k]).powi(2)).sum::<f64>().sqrt();
                state.foot_speed[i] = (d / dt / FOOT_SPEED_NORM).min(1.0);
            }
            was_stance[i] = stance;
        }

        let out_of_bounds = !field.contains(pose.x, pose.y) || tracks.iter().any(|f| !field.contains(f.pos[0], f.pos[1]));
        if out_of_bounds {
            truncated = true;
            break;
        }

        let support: Vec<f64> = tracks
            .iter()
            .zip(in_stance)
            .filter(|(_, s)| *s)
            .map(|(f, _)| f.pos[2])
            .collect();
        let ground = if support.is_empty() {
            tracks.iter().map(|f| f.pos[2]).sum::<f64>() / 2.0
        } else {
            support.iter().sum::<f64>() / support.len() as f64
        };
        let new_z = pelvis_z + 0.3 * (ground + spec.pelvis_height - pelvis_z);
        let roll = 0.03 * (2.0 * PI * phi).sin();
        let speed = cmd.linear[0].hypot(cmd.linear[1]);
        let pitch = 0.02 * (4.0 * PI * phi).cos() * speed;
        let (v_z, omega_x, omega_y) = match steps.last() {
            Some(p) => (
                (new_z - pelvis_z) / dt,
                (roll - p.state.pelvis_roll) / dt,
                (pitch - p.state.pelvis_pitch) / dt,
            ),
            None => (0.0, 0.0, 0.0),
        };
        pelvis_z = new_z;

        state.v_xy = cmd.linear;
        state.v_z = v_z;
        state.omega = [omega_x, omega_y, cmd.yaw_rate];
        state.pelvis_roll = roll;
        state.pelvis_pitch = pitch;
        state.pelvis_yaw = pose.yaw;
        state.single_contact = in_stance[0] != in_stance[1];
        state.foot_positions = [
            [tracks[0].pos[0], tracks[0].pos[1]],
            [tracks[1].pos[0], tracks[1].pos[1]],
        ];
        let amplitude = 15.0 + 25.0 * speed.min(1.5) + 10.0 * cmd.yaw_rate.abs();
        for j in 0..MOTOR_COUNT {
            state.torques[j] = amplitude * (2.0 * PI * phi + 0.7 * j as f64).sin()
                + spec.torque_sigma * rng.sample::<f64, _>(StandardNormal);
        }

        let pelvis = [pose.x, pose.y, pelvis_z];
        let mut proprio = ProprioObservation {
            pelvis_orientation: quaternion_from_euler(roll, pitch, pose.yaw),
            pelvis_angular_velocity: state.omega,
            command: cmd,
            clock: clock_inputs(phi),
            ..Default::default()
        };
        for foot in Foot::BOTH {
            let (motors, joints) = leg_angles(pelvis, pose.yaw, &tracks[foot.index()], foot, spec.half_width);
            let m = 5 * foot.index();
            proprio.motor_positions[m..m + 5].copy_from_slice(&motors);
            let j = 2 * foot.index();
            proprio.joint_positions[j..j + 2].copy_from_slice(&joints);
        }
        if let Some(p) = steps.last().map(|s| &s.proprio) {
            for k in 0..MOTOR_COUNT {
                proprio.motor_velocities[k] = (proprio.motor_positions[k] - p.motor_positions[k]) / dt;
            }
            for k in 0..proprio.joint_positions.len() {
                proprio.joint_velocities[k] = (proprio.joint_positions[k] - p.joint_positions[k]) / dt;
            }
        }
        state.validate()?;
        steps.push(WalkStep {
            t,
            phi,
            command: cmd,
            in_stance,
            state,
            proprio,
            feet: [tracks[0].pos, tracks[1].pos],
            pelvis,
        });
        pose = pose.advance(&cmd, dt);
    }
    Ok(Trajectory { steps, truncated })
}

/// Five motor angles (hip roll, hip yaw, hip pitch, knee, foot) and two
/// passive joint angles (shin, tarsus) for one leg.
fn leg_angles(pelvis: [f64; 3], yaw: f64, track: &FootTrack, foot: Foot, half_width: f64) -> ([f64; 5], [f64; 2]) {
    let (s, c) = yaw.sin_cos();
    let dx = track.pos[0] - pelvis[0];
    let dy = track.pos[1] - pelvis[1];
    let fwd = c * dx + s * dy;
    let lat = -s * dx + c * dy - foot.sign() * half_width;
    let down = (pelvis[2] - track.pos[2]).max(1e-3);
    let length = (fwd * fwd + lat * lat + down * down).sqrt();
    let knee = -2.0 * (length / (2.0 * THIGH_SHIN)).clamp(0.0, 1.0).acos();
    let hip_roll = lat.atan2(down);
    let hip_yaw = wrap_angle(track.yaw - yaw);
    let hip_pitch = fwd.atan2(down) - 0.5 * knee;
    let foot_angle = -(hip_pitch + knee);
    let shin = 0.05 * knee;
    let tarsus = -0.8 * knee + 0.1;
    ([hip_roll, hip_yaw, hip_pitch, knee, foot_angle], [shin, tarsus])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> HeightField {
        let mut f = HeightField::flat(400, 400, 0.05).unwrap();
        f.origin = [-10.0, -10.0];
        f
    }

    #[test]
    fn zero_command_stays_put() {
        let traj = roll_trajectory(&WalkSpec::default(), &flat()).unwrap();
        assert_eq!(traj.steps.len(), 300);
        let (a, b) = (traj.steps[0].pelvis, traj.steps[299].pelvis);
        assert_eq!((a[0], a[1]), (b[0], b[1]));
    }

    #[test]
    fn forward_command_covers_distance() {
        let spec = WalkSpec {
            command: VelocityCommand::new(1.0, 0.0, 0.0),
            start_xy: [-8.0, 0.0],
            ..Default::default()
        };
        let traj = roll_trajectory(&spec, &flat()).unwrap();
        let dx = traj.steps[299].pelvis[0] - traj.steps[0].pelvis[0];
        assert!((dx - 7.5).abs() <= CONTROL_DT + 1e-9, "{dx}");
    }

    #[test]
    fn stance_feet_do_not_move_and_contacts_fire_once() {
        let spec = WalkSpec {
            command: VelocityCommand::new(0.6, 0.2, 0.3),
            ..Default::default()
        };
        let traj = roll_trajectory(&spec, &flat()).unwrap();
        for w in traj.steps.windows(2) {
            for i in 0..2 {
                let s = &w[1];
                if w[0].in_stance[i] && s.in_stance[i] {
                    assert_eq!(w[0].feet[i], s.feet[i]);
                    assert_eq!(s.state.foot_speed[i], 0.0);
                }
                let touchdown = !w[0].in_stance[i] && s.in_stance[i];
                assert_eq!(s.state.first_contact[i], touchdown);
                if touchdown {
                    assert!(s.state.airtime[i] > 0.0);
                }
                assert_eq!(s.state.single_contact, s.in_stance[0] != s.in_stance[1]);
            }
        }
    }

    #[test]
    fn leaving_the_field_truncates() {
        let spec = WalkSpec {
            command: VelocityCommand::new(1.0, 0.0, 0.0),
            start_xy: [8.0, 0.0],
            ..Default::default()
        };
        let traj = roll_trajectory(&spec, &flat()).unwrap();
        assert!(traj.truncated);
        assert!(traj.steps.len() < 300);
    }

    #[test]
    fn over_long_walk_rejected() {
        let spec = WalkSpec {
            steps: 301,
            ..Default::default()
        };
        assert!(roll_trajectory(&spec, &flat()).is_err());
    }
}
