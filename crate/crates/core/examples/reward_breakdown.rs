//! Scores a few hand-built robot states and prints every reward term next to
//! the weighted total, at the start and end of the reward curriculum.

use terrastride::gait::{gait_clocks, ClockShape};
use terrastride::rewards::total_reward;
use terrastride::state::{ActionVector, RobotState, VelocityCommand};
use terrastride::terrain::CurriculumState;

fn main() -> terrastride::Result<()> {
    let shape = ClockShape::default();
    let standing = RobotState { foot_force: [0.5, 0.5], ..Default::default() };
    let walking = RobotState {
        foot_force: [0.6, 0.0],
        foot_speed: [0.0, 0.8],
        v_xy: [0.9, 0.05],
        omega: [0.1, -0.05, 0.0],
        single_contact: true,
        ..Default::default()
    };
    let stumbling = RobotState {
        foot_force: [0.0, 0.9],
        foot_speed: [0.7, 0.3],
        v_xy: [0.2, -0.6],
        v_z: 0.4,
        pelvis_roll: 0.3,
        ..Default::default()
    };
    let cases = [
        ("standing", standing, VelocityCommand::ZERO),
        ("walking", walking, VelocityCommand::new(1.0, 0.0, 0.0)),
        ("stumbling", stumbling, VelocityCommand::new(1.0, 0.0, 0.0)),
    ];
    let phi = shape.mid_stance(terrastride::state::Foot::Left);
    let clocks = gait_clocks(phi, &shape)?;
    let action = ActionVector::zeros();
    for c_r in [1.0, 0.0] {
        let curriculum = CurriculumState::fixed(1.0, c_r);
        println!("c_r = {c_r}");
        for (name, state, cmd) in &cases {
            let b = total_reward(state, cmd, &clocks, &action, &action, &curriculum)?;
            let terms: Vec<String> = b.components().iter().map(|(k, v)| format!("{k} {v:.3}")).collect();
            println!("  {name:<10} total {:.4} | {}", b.total, terms.join(", "));
        }
    }
    Ok(())
}
