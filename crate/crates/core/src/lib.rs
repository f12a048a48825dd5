//! Environment toolkit for perceptive bipedal locomotion.
//!
//! The crate covers the pieces of a teacher/student locomotion pipeline that do
//! not need a physics engine:
//!
//! - [`terrain`]: the five procedural terrain modes plus flat ground, scaled by a
//!   terrain curriculum factor, with PGM/JSON import and export.
//! - [`extero`]: the foot-centred circular height sampling pattern and the
//!   nominal/offset/noisy exteroceptive noise model.
//! - [`gait`] and [`rewards`]: gait phase, clock inputs, per-foot gait clocks and
//!   every reward component with the curriculum-weighted aggregate.
//! - [`commands`]: the velocity command randomization table.
//! - [`nn`] and [`belief`]: a small f64 network core with exact backpropagation
//!   through time, Adam, and the attention-gated recurrent belief
//!   encoder/decoder trained on reconstruction and imitation losses.
//! - [`synthwalker`] and [`dataset`]: kinematic gait trajectories over a height
//!   field, used as a data source in place of a simulator.
//! - [`cli`] and [`report`]: the reproducible-run front end behind the
//!   `terrastride` binary.

pub mod belief;
pub mod cli;
pub mod commands;
pub mod dataset;
mod error;
pub mod extero;
pub mod gait;
pub mod nn;
pub mod report;
pub mod rewards;
pub mod rng;
pub mod state;
pub mod synthwalker;
pub mod terrain;

pub use error::{Error, Result};
