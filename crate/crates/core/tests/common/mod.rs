//! Oracle checks shared by the integration tests and the acceptance target.
//!
//! Each check returns `Ok(detail)` when the property holds and `Err(detail)`
//! naming the first violation otherwise.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use terrastride::belief::{sequence_loss, ArchConfig, LossWeights, Sequence, StudentPolicy};
use terrastride::commands::CommandDistribution;
use terrastride::gait::{gait_clocks, ClockShape, GaitClocks};
use terrastride::nn::gradcheck::{check_gradients, GradCheckReport, STEP};
use terrastride::nn::Parameters;
use terrastride::rewards::{self, total_reward, RewardBreakdown};
use terrastride::rng::{derive_seed, rng_from};
use terrastride::state::{ActionVector, Foot, RobotState, VelocityCommand, ACTION_DIM, MOTOR_COUNT, PROPRIO_DIM};
use terrastride::terrain::{
    generate, CurriculumState, HeightField, TerrainKind, TerrainMode, TerrainSpec, EDGE_HEIGHT_RANGE,
    QUANT_STEP_RANGE, SQUARE_HEIGHT_RANGE, SQUARE_SIDE_RANGE, STAIRS_PER_FLIGHT, STAIR_RISE_RANGE, STAIR_RUN_RANGE,
};

pub type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&v)
}

// ---------------------------------------------------------------------------
// Terrain

pub const PGM_QUANTUM: f64 = 1e-3;

fn levels(field: &HeightField) -> Vec<f64> {
    let mut v = field.heights.clone();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Every mode contract for one seed, at a curriculum factor drawn from the seed.
pub fn terrain_contracts(kind: TerrainKind, seed: u64) -> Result<(), String> {
    let spec = TerrainSpec::random(kind, seed);
    let c_t = if seed % 4 == 0 { 1.0 } else { rng_from(&[seed, 0xC7]).random_range(0.05..=1.0) };
    let size = match kind {
        TerrainKind::Stairs => (6, 480),
        _ => (120, 120),
    };
    let res = 0.05;
    let field = generate(&spec, size, res, c_t).map_err(|e| e.to_string())?;
    let tag = |msg: String| format!("{} seed {seed} c_t {c_t:.3}: {msg}", kind.name());
    ensure(field.heights.iter().all(|h| h.is_finite()), || tag("non-finite height".into()))?;
    ensure(field.heights.iter().all(|&h| h >= 0.0), || tag("negative height".into()))?;

    let flat = generate(&spec, size, res, 0.0).map_err(|e| e.to_string())?;
    ensure(flat.heights.iter().all(|&h| h == 0.0), || tag("c_t = 0 is not flat".into()))?;
    let half = generate(&spec, size, res, 0.5 * c_t).map_err(|e| e.to_string())?;
    ensure(
        half.heights.iter().zip(&field.heights).all(|(a, b)| a.abs() <= b.abs() + 1e-12),
        || tag("curriculum is not monotone".into()),
    )?;
    let again = generate(&spec, size, res, c_t).map_err(|e| e.to_string())?;
    ensure(again == field, || tag("generation is not deterministic".into()))?;

    let (lo, hi) = field.min_max();
    match spec.mode {
        TerrainMode::Flat => ensure(hi == 0.0, || tag("flat has relief".into()))?,
        TerrainMode::Hills(h) => {
            let top = h.max_height * c_t;
            ensure(lo.abs() <= PGM_QUANTUM && lo >= 0.0, || tag(format!("hills min {lo}")))?;
            ensure((hi - top).abs() <= PGM_QUANTUM && hi <= top + 1e-12, || {
                tag(format!("hills max {hi} vs {top}"))
            })?;
        }
        TerrainMode::Edges { height, .. } => {
            ensure(in_range(height, EDGE_HEIGHT_RANGE), || tag(format!("edge height {height}")))?;
            let l = levels(&field);
            ensure(l == vec![0.0, height * c_t], || tag(format!("edge levels {l:?}")))?;
        }
        TerrainMode::Squares { side, max_height } => {
            ensure(in_range(side, SQUARE_SIDE_RANGE), || tag(format!("square side {side}")))?;
            ensure(in_range(max_height, SQUARE_HEIGHT_RANGE), || tag(format!("square max {max_height}")))?;
            ensure(hi <= max_height * c_t, || tag(format!("square height {hi} above {}", max_height * c_t)))?;
            let mut by_square = std::collections::HashMap::new();
            for r in 0..field.rows {
                for c in 0..field.cols {
                    let [x, y] = field.cell_center(r, c);
                    let key = ((x / side).floor() as i64, (y / side).floor() as i64);
                    let h = field.get(r, c);
                    if *by_square.entry(key).or_insert(h) != h {
                        return Err(tag(format!("square {key:?} is not level")));
                    }
                }
            }
            let distinct = levels(&field).len();
            ensure(distinct > by_square.len() / 2, || tag(format!("only {distinct} square heights")))?;
        }
        TerrainMode::QuantizedHills { step, hills } => {
            ensure(in_range(step, QUANT_STEP_RANGE), || tag(format!("quantization step {step}")))?;
            let q = step * c_t;
            for &h in &field.heights {
                let k = h / q;
                ensure((k - k.round()).abs() <= 1e-9, || tag(format!("{h} is not a multiple of {q}")))?;
            }
            ensure(hi <= hills.max_height * c_t + 1e-12, || tag(format!("quantized max {hi}")))?;
        }
        TerrainMode::Stairs { run, rise, count, .. } => {
            ensure(in_range(run, STAIR_RUN_RANGE), || tag(format!("stair run {run}")))?;
            ensure(in_range(rise, STAIR_RISE_RANGE), || tag(format!("stair rise {rise}")))?;
            ensure(count == STAIRS_PER_FLIGHT, || tag(format!("{count} stairs per flight")))?;
            let row: Vec<f64> = (0..field.cols).map(|c| field.get(0, c)).collect();
            for r in 1..field.rows {
                ensure((0..field.cols).all(|c| field.get(r, c) == row[c]), || {
                    tag("stairs vary across the flight".into())
                })?;
            }
            let step = rise * c_t;
            let mut signs = Vec::new();
            for w in row.windows(2) {
                let d = w[1] - w[0];
                if d != 0.0 {
                    ensure((d.abs() - step).abs() <= 1e-12, || tag(format!("riser {d} vs {step}")))?;
                    signs.push(d.signum());
                }
            }
            ensure(signs.first() == Some(&1.0), || tag("first flight does not ascend".into()))?;
            let mut runs: Vec<(f64, usize)> = Vec::new();
            for s in signs {
                match runs.last_mut() {
                    Some((last, n)) if *last == s => *n += 1,
                    _ => runs.push((s, 1)),
                }
            }
            ensure(runs.len() >= 2, || tag("no descending flight".into()))?;
            let complete = &runs[..runs.len() - 1];
            ensure(complete.iter().all(|&(_, n)| n == count), || tag(format!("flight lengths {runs:?}")))?;
            let top = levels(&field).last().copied().unwrap_or(0.0);
            ensure((top - count as f64 * step).abs() <= 1e-12, || tag(format!("top plateau {top}")))?;
        }
    }
    Ok(())
}

pub fn terrain_suite(seeds: u64) -> Check {
    let kinds = [
        TerrainKind::Flat,
        TerrainKind::Hills,
        TerrainKind::Edges,
        TerrainKind::Squares,
        TerrainKind::QuantizedHills,
        TerrainKind::Stairs,
    ];
    for kind in kinds {
        for i in 0..seeds {
            terrain_contracts(kind, derive_seed(&[i, 0x7E55]))?;
        }
    }
    Ok(format!("{} modes x {seeds} seeds", kinds.len()))
}

// ---------------------------------------------------------------------------
// Gait clocks

pub const PHASE_GRID: usize = 10_000;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn clock_suite(shape: &ClockShape) -> Check {
    let s = shape.stance_fraction;
    let mut double = 0usize;
    for i in 0..PHASE_GRID {
        let phi = i as f64 / PHASE_GRID as f64;
        let c = gait_clocks(phi, shape).map_err(|e| e.to_string())?;
        let shifted = gait_clocks((phi + 0.5).rem_euclid(1.0), shape).map_err(|e| e.to_string())?;
        let next = gait_clocks(phi + 1.0, shape).map_err(|e| e.to_string())?;
        ensure(close(c.k_frc[1], shifted.k_frc[0], 1e-12), || {
            format!("half-period offset fails at phase {phi}")
        })?;
        ensure(c.k_vel == [-c.k_frc[0], -c.k_frc[1]], || format!("k_vel != -k_frc at {phi}"))?;
        ensure(
            close(c.k_frc[0], next.k_frc[0], 1e-9) && close(c.k_frc[1], next.k_frc[1], 1e-9),
            || format!("clocks not 1-periodic at {phi}"),
        )?;
        ensure(c.k_frc.iter().all(|k| (-1.0..=1.0).contains(k)), || format!("clock outside [-1, 1] at {phi}"))?;
        if shape.in_stance(phi, Foot::Left) && shape.in_stance(phi, Foot::Right) {
            double += 1;
        }
    }
    let measured = double as f64 / PHASE_GRID as f64;
    let expected = 2.0 * (s - 0.5);
    let rel = (measured - expected).abs() / expected;
    ensure(rel <= 0.01, || {
        format!("double stance {measured:.4} vs {expected:.4} (stance fraction {s})")
    })?;
    Ok(format!("stance {s}: double stance {measured:.4} vs {expected:.4}"))
}

// ---------------------------------------------------------------------------
// Rewards

pub fn clocks(l: f64, r: f64) -> GaitClocks {
    GaitClocks {
        k_frc: [l, r],
        k_vel: [-l, -r],
    }
}

pub struct Example {
    pub name: &'static str,
    pub got: f64,
    pub want: f64,
}

/// Every worked reward example with its hand-computed value.
pub fn reward_examples() -> Vec<Example> {
    let z = RobotState::default;
    let cmd = |x: f64, y: f64, w: f64| VelocityCommand::new(x, y, w);
    let with = |f: &dyn Fn(&mut RobotState)| {
        let mut s = z();
        f(&mut s);
        s
    };
    let ex = |name, got, want| Example { name, got, want };
    let tanh_pi = PI.tanh();
    let mut out = vec![
        ex("r_frc zero forces", rewards::r_frc(&z(), &clocks(1.0, -1.0)), 0.0),
        ex(
            "r_frc loaded left foot, k = -1",
            rewards::r_frc(&with(&|s| s.foot_force = [1.0, 0.0]), &clocks(-1.0, 1.0)),
            -tanh_pi,
        ),
        ex(
            "r_frc antisymmetric cancellation",
            rewards::r_frc(&with(&|s| s.foot_force = [1.0, 1.0]), &clocks(1.0, -1.0)),
            0.0,
        ),
        ex("r_vel still feet", rewards::r_vel(&z(), &clocks(1.0, -1.0)), 0.0),
        ex(
            "r_vel moving left foot, k_vel = -1",
            rewards::r_vel(
                &with(&|s| s.foot_speed = [1.0, 0.0]),
                &GaitClocks {
                    k_frc: [1.0, -1.0],
                    k_vel: [-1.0, 1.0],
                },
            ),
            -tanh_pi,
        ),
        ex("r_air no first contact", rewards::r_air(&with(&|s| s.airtime = [0.8, 0.8])), 0.0),
        ex(
            "r_air left contact after 0.8 s",
            rewards::r_air(&with(&|s| {
                s.airtime = [0.8, 0.0];
                s.first_contact = [true, false];
            })),
            0.3,
        ),
        ex(
            "r_air both feet after 0.4 s",
            rewards::r_air(&with(&|s| {
                s.airtime = [0.4, 0.4];
                s.first_contact = [true, true];
            })),
            -0.2,
        ),
        ex("r_one single stance", rewards::r_one(&with(&|s| s.single_contact = true)), 1.0),
        ex("r_one double stance or flight", rewards::r_one(&z()), 0.0),
        ex("r_v_xy zero command", rewards::r_v_xy(&z(), &cmd(0.0, 0.0, 0.0)), 1.0),
        ex(
            "r_v_xy saturates",
            rewards::r_v_xy(&with(&|s| s.v_xy = [1.2, 0.0]), &cmd(1.0, 0.0, 0.0)),
            1.0,
        ),
        ex(
            "r_v_xy half speed",
            rewards::r_v_xy(&with(&|s| s.v_xy = [0.5, 0.0]), &cmd(1.0, 0.0, 0.0)),
            (-0.5f64).exp(),
        ),
        ex("r_omega_z zero command", rewards::r_omega_z(&z(), &cmd(0.0, 0.0, 0.0)), 1.0),
        ex(
            "r_omega_z saturates",
            rewards::r_omega_z(&with(&|s| s.omega = [0.0, 0.0, 1.5]), &cmd(0.0, 0.0, 1.0)),
            1.0,
        ),
        ex("r_omega_z not turning", rewards::r_omega_z(&z(), &cmd(0.0, 0.0, 1.0)), (-2.0f64).exp()),
        ex(
            "r_lov parallel",
            rewards::r_lov(&with(&|s| s.v_xy = [0.6, 0.0]), &cmd(1.0, 0.0, 0.0)),
            1.0,
        ),
        ex(
            "r_lov lateral drift",
            rewards::r_lov(&with(&|s| s.v_xy = [0.7, 0.2]), &cmd(1.0, 0.0, 0.0)),
            (-1.0f64).exp(),
        ),
        ex("r_fo horizontal feet", rewards::r_fo(&z(), 0.0), 1.0),
        ex(
            "r_fo full terrain curriculum",
            rewards::r_fo(&with(&|s| s.foot_axes = [[0.0, 0.0, 1.0]; 2]), 1.0),
            1.0,
        ),
        ex(
            "r_fo tilted feet",
            rewards::r_fo(&with(&|s| s.foot_axes = [[0.75f64.sqrt(), 0.0, 0.5]; 2]), 0.0),
            (-1.5f64).exp(),
        ),
        ex("r_pm at rest", rewards::r_pm(&z()), 1.0),
        ex("r_pm vertical bounce", rewards::r_pm(&with(&|s| s.v_z = 1.0)), (-1.0f64).exp()),
        ex("r_po level", rewards::r_po(&z()), 1.0),
        ex(
            "r_po tilted",
            rewards::r_po(&with(&|s| {
                s.pelvis_roll = 0.1;
                s.pelvis_pitch = 0.1;
            })),
            (-0.6f64).exp(),
        ),
        ex("r_t no torque", rewards::r_t(&z()), 1.0),
        ex(
            "r_t mean torque 50",
            rewards::r_t(&with(&|s| s.torques = [50.0; MOTOR_COUNT])),
            (-1.0f64).exp(),
        ),
        ex("r_a same action", rewards::r_a(&ActionVector::zeros(), &ActionVector::zeros()), 1.0),
        ex(
            "r_a uniform change 0.2",
            rewards::r_a(&ActionVector([0.2; ACTION_DIM]), &ActionVector::zeros()),
            (-1.0f64).exp(),
        ),
    ];
    let standing = total_reward(
        &z(),
        &VelocityCommand::ZERO,
        &clocks(1.0, -1.0),
        &ActionVector::zeros(),
        &ActionVector::zeros(),
        &CurriculumState::fixed(1.0, 1.0),
    )
    .expect("standing state is valid");
    out.push(ex("ideal standing total", standing.total, 0.85));
    out
}

pub const MAX_AIRTIME: f64 = 1.5;

/// A random but physically plausible reward input.
pub fn random_reward_input<R: Rng>(rng: &mut R) -> (RobotState, VelocityCommand, GaitClocks, ActionVector, ActionVector) {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..=hi);
    let mut axis = || {
        let v = [u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-9);
        v.map(|x| x / n)
    };
    let a0 = axis();
    let a1 = axis();
    let mut s = RobotState {
        foot_force: [u(0.0, 1.0), u(0.0, 1.0)],
        foot_speed: [u(0.0, 1.0), u(0.0, 1.0)],
        v_xy: [u(-2.0, 2.0), u(-2.0, 2.0)],
        v_z: u(-1.0, 1.0),
        omega: [u(-2.0, 2.0), u(-2.0, 2.0), u(-2.0, 2.0)],
        pelvis_roll: u(-0.5, 0.5),
        pelvis_pitch: u(-0.5, 0.5),
        pelvis_yaw: u(-PI, PI),
        foot_axes: [a0, a1],
        airtime: [u(0.0, MAX_AIRTIME), u(0.0, MAX_AIRTIME)],
        ..Default::default()
    };
    for t in s.torques.iter_mut() {
        *t = u(-150.0, 150.0);
    }
    s.first_contact = [rng.random(), rng.random()];
    s.single_contact = rng.random();
    let cmd = VelocityCommand::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
    let clocks = gait_clocks(rng.random(), &ClockShape::default()).expect("default shape");
    let a = ActionVector(std::array::from_fn(|_| rng.random_range(-1.0..=1.0)));
    let b = ActionVector(std::array::from_fn(|_| rng.random_range(-1.0..=1.0)));
    (s, cmd, clocks, a, b)
}

/// The aggregate written out term by term.
pub fn hand_total(b: &RewardBreakdown) -> f64 {
    let c = b.c_r;
    (0.25 * b.r_frc + 0.25 * b.r_vel + 0.2) * c
        + (b.r_air + 0.1 * b.r_one) * (1.0 - c)
        + 0.2 * b.r_v_xy
        + 0.2 * b.r_omega_z
        + 0.05 * b.r_lov
        + 0.05 * b.r_fo
        + 0.05 * b.r_pm
        + 0.05 * b.r_po
        + 0.025 * b.r_t
        + 0.025 * b.r_a
}

/// Upper bound on the total for `c_r` in {0, 1} and airtime up to `max_airtime`.
pub fn reward_upper_bound(c_r: f64, max_airtime: f64) -> f64 {
    1.2 * c_r + (1.0 - c_r) * (2.0 * (max_airtime - 0.5) + 0.1) + 0.65
}

pub fn reward_suite(states: usize) -> Check {
    let mut worst = 0.0f64;
    for e in reward_examples() {
        let err = (e.got - e.want).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("{}: {} vs {}", e.name, e.got, e.want))?;
    }
    let mut rng = rng_from(&[0x4E3A]);
    let mut worst_sum = 0.0f64;
    for i in 0..states {
        let (s, cmd, clk, a, b) = random_reward_input(&mut rng);
        let c_t = rng.random_range(0.0..=1.0);
        for c_r in [0.0, 1.0] {
            let cur = CurriculumState::fixed(c_t, c_r);
            let r = total_reward(&s, &cmd, &clk, &a, &b, &cur).map_err(|e| format!("state {i}: {e}"))?;
            let d = (r.total - hand_total(&r)).abs();
            worst_sum = worst_sum.max(d);
            ensure(d <= 1e-12, || format!("state {i}: total off the weighted sum by {d:e}"))?;
            ensure(close(r.total, r.weighted_sum(), 1e-12), || format!("state {i}: weighted_sum disagrees"))?;
            for (name, v) in [
                ("r_v_xy", r.r_v_xy),
                ("r_omega_z", r.r_omega_z),
                ("r_lov", r.r_lov),
                ("r_fo", r.r_fo),
                ("r_pm", r.r_pm),
                ("r_po", r.r_po),
                ("r_t", r.r_t),
                ("r_a", r.r_a),
            ] {
                ensure(v > 0.0 && v <= 1.0, || format!("state {i}: {name} = {v} outside (0, 1]"))?;
            }
            ensure(r.r_frc.abs() < 2.0 && r.r_vel.abs() < 2.0, || format!("state {i}: clock term outside (-2, 2)"))?;
            let bound = reward_upper_bound(c_r, MAX_AIRTIME);
            ensure(r.total <= bound + 1e-12, || format!("state {i}: total {} above bound {bound}", r.total))?;

            // Perturb the regime that c_r switches off; the total must not move.
            let mut other = s.clone();
            let mut other_clk = clk;
            if c_r == 1.0 {
                other.airtime = [other.airtime[1], other.airtime[0] + 0.3];
                other.first_contact = [!s.first_contact[0], !s.first_contact[1]];
                other.single_contact = !s.single_contact;
            } else {
                other.foot_force = [1.0 - s.foot_force[0], s.foot_force[1] * 0.5];
                other.foot_speed = [s.foot_speed[1], s.foot_speed[0]];
                other_clk = clocks(-clk.k_frc[0], -clk.k_frc[1]);
            }
            let r2 = total_reward(&other, &cmd, &other_clk, &a, &b, &cur).map_err(|e| e.to_string())?;
            ensure(r2.total == r.total, || format!("state {i}: c_r = {c_r} leaks the other regime"))?;
        }
    }
    Ok(format!(
        "{} worked examples (worst {worst:.1e}), {states} states x 2 regimes (worst aggregate error {worst_sum:.1e})",
        reward_examples().len()
    ))
}

// ---------------------------------------------------------------------------
// Gradient check

pub fn random_sequence(arch: &ArchConfig, len: usize, seed: u64) -> Sequence {
    let mut rng = rng_from(&[seed]);
    let p2 = 2 * arch.pattern_points;
    Sequence {
        pattern_points: arch.pattern_points,
        proprio: (0..len * PROPRIO_DIM).map(|_| rng.random_range(-1.0..1.0)).collect(),
        noisy: (0..len * p2).map(|_| rng.random_range(0.0..0.6)).collect(),
        clean: (0..len * p2).map(|_| rng.random_range(0.0..0.6)).collect(),
        teacher_actions: (0..len * ACTION_DIM).map(|_| rng.random_range(-0.5..0.5)).collect(),
    }
}

/// Central differences on every parameter of the desk student over 20 steps.
pub fn student_gradient_report(arch: &ArchConfig) -> (usize, GradCheckReport) {
    let policy = StudentPolicy::seeded(arch, 3).expect("valid arch");
    let seq = random_sequence(arch, 20, 4);
    let w = LossWeights::default();
    let loss = |p: &StudentPolicy| sequence_loss(p, &seq, &w, 1.0, None).expect("loss").total(&w);
    let mut grad = policy.zeros_like();
    sequence_loss(&policy, &seq, &w, 1.0 / 20.0, Some(&mut grad)).expect("gradient");
    (policy.param_count(), check_gradients(&policy, &grad, loss, STEP, 1))
}

// ---------------------------------------------------------------------------
// Command sampler

pub fn command_suite(draws: usize) -> Check {
    let dist = CommandDistribution::default();
    let mut rng = rng_from(&[0xC0DE]);
    let mut counts = vec![0usize; dist.rows().len()];
    for _ in 0..draws {
        let (row, c) = dist.sample_with_row(&mut rng);
        counts[row] += 1;
        let v = c.as_array();
        ensure(v.iter().all(|x| (-1.0..=1.0).contains(x)), || format!("command {v:?} outside [-1, 1]"))?;
    }
    let mut worst = 0.0f64;
    for (i, (&n, &p)) in counts.iter().zip(dist.probabilities()).enumerate() {
        let f = n as f64 / draws as f64;
        worst = worst.max((f - p).abs());
        ensure((f - p).abs() <= 0.005, || format!("row {i}: frequency {f:.4} vs {p:.4}"))?;
    }
    Ok(format!("{draws} draws, worst row deviation {worst:.5}"))
}

// ---------------------------------------------------------------------------
// CLI

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_terrastride")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn cli_ok(args: &[&str]) -> Result<Output, String> {
    let out = run_cli(args);
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "`terrastride {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|rd| rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_file()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

/// Byte-compares every file of two output directories.
pub fn same_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let fa = files_in(a);
    let fb = files_in(b);
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    ensure(names(&fa) == names(&fb), || format!("{} and {} hold different files", a.display(), b.display()))?;
    ensure(!fa.is_empty(), || format!("{} is empty", a.display()))?;
    for (x, y) in fa.iter().zip(&fb) {
        let bx = std::fs::read(x).map_err(|e| e.to_string())?;
        let by = std::fs::read(y).map_err(|e| e.to_string())?;
        ensure(bx == by, || format!("{} differs between runs", x.display()))?;
    }
    Ok(fa.len())
}

/// Runs each subcommand twice with identical flags and compares outputs.
pub fn determinism_suite(root: &Path) -> Check {
    let p = |s: &str| root.join(s).display().to_string();
    let mut compared = 0;
    for round in ["a", "b"] {
        let o = |s: &str| p(&format!("{s}_{round}"));
        cli_ok(&["terrain", "--mode", "squares", "--seed", "5", "--ct", "0.7", "--size", "6", "--out", &o("terrain")])?;
        cli_ok(&["terrain", "--mode", "flat", "--seed", "1", "--size", "12", "--out", &o("flat")])?;
        let field = format!("{}/terrain.json", p("flat_a"));
        cli_ok(&[
            "trace", "--terrain-file", &field, "--command", "0.6,0.1,-0.2", "--steps", "120", "--noise-mode", "noisy",
            "--seed", "3", "--out", &o("trace"),
        ])?;
        let small = ["--episodes", "6", "--heldout", "2", "--epochs", "2", "--seed", "11"];
        let mut args = vec!["train-denoiser"];
        args.extend(small);
        let d = o("denoise");
        args.extend(["--out", &d]);
        cli_ok(&args)?;
        let mut args = vec!["distill"];
        args.extend(small);
        let s = o("distill");
        args.extend(["--out", &s]);
        cli_ok(&args)?;
        // A tiny run fails the thresholds; report still writes everything and exits 1.
        let rep = o("report");
        let out = run_cli(&["report", "--metrics", &d, "--metrics", &s, "--out", &rep]);
        ensure(out.status.code() == Some(1), || format!("report exited with {:?}", out.status.code()))?;
    }
    for name in ["terrain", "flat", "trace", "denoise", "distill"] {
        compared += same_outputs(&root.join(format!("{name}_a")), &root.join(format!("{name}_b")))?;
    }
    // The report manifest records its input paths, which differ between rounds.
    for f in ["loss.png", "gate.png", "summary.json"] {
        let x = std::fs::read(root.join("report_a").join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(root.join("report_b").join(f)).map_err(|e| e.to_string())?;
        let strip = |b: Vec<u8>| String::from_utf8_lossy(&b).replace("_a", "").replace("_b", "").into_bytes();
        let same = if f.ends_with(".png") { x == y } else { strip(x) == strip(y) };
        ensure(same, || format!("report {f} differs between runs"))?;
        compared += 1;
    }
    Ok(format!("{compared} files identical across reruns of 5 subcommands"))
}
