//! Rolls a synthetic walk on flat ground and compares the clock reward it
//! collects with the best attainable clock reward.

use terrastride::gait::{gait_clocks, ClockShape};
use terrastride::rewards::{r_frc, r_vel};
use terrastride::state::VelocityCommand;
use terrastride::synthwalker::{roll_trajectory, WalkSpec};
use terrastride::terrain::HeightField;

fn main() -> terrastride::Result<()> {
    let mut field = HeightField::flat(240, 240, 0.05)?;
    field.origin = [-6.0, -6.0];
    let shape = ClockShape::default();
    for cmd in [VelocityCommand::ZERO, VelocityCommand::new(1.0, 0.0, 0.0), VelocityCommand::new(0.0, 0.5, 0.5)] {
        let spec = WalkSpec { command: cmd, start_xy: [-4.0, 0.0], ..Default::default() };
        let traj = roll_trajectory(&spec, &field)?;
        let (mut got, mut best, mut nominal) = (0.0, 0.0, 0.0);
        for step in &traj.steps {
            let c = gait_clocks(step.phi, &shape)?;
            got += r_frc(&step.state, &c) + r_vel(&step.state, &c);
            for i in 0..2 {
                best += (std::f64::consts::PI * c.k_frc[i].abs()).tanh();
                let f = if step.in_stance[i] { spec.stance_force } else { 0.0 };
                let v = if step.in_stance[i] { 0.0 } else { 1.0 };
                nominal += (std::f64::consts::PI * f * c.k_frc[i]).tanh() + (std::f64::consts::PI * v * c.k_vel[i]).tanh();
            }
        }
        let last = traj.steps.last().unwrap();
        println!(
            "command {:?}: {} steps, pelvis displacement ({:.3}, {:.3}), clock reward {:.1} / max {:.1} ({:.1}%), vs schedule-following reference {:.1} ({:.1}%)",
            cmd.as_array(),
            traj.steps.len(),
            last.pelvis[0] - traj.steps[0].pelvis[0],
            last.pelvis[1] - traj.steps[0].pelvis[1],
            got,
            best,
            100.0 * got / best,
            nominal,
            100.0 * got / nominal
        );
    }
    Ok(())
}
