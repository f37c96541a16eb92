//! Foosball table simulation and robot-learning toolkit.
//!
//! * [`physics`] deterministic fixed-step table physics
//! * [`env`] training tasks, observations, rewards and batched stepping
//! * [`estimator`] synthetic detections and Kalman tracking
//! * [`ppo`] actor-critic PPO, self-play league and checkpoints
//! * [`arena`] authoritative match runtime, wire protocol and match logs

// validation writes `!(a < b)` on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arena;
pub mod env;
pub mod error;
pub mod estimator;
pub mod physics;
pub mod ppo;

pub use error::{Error, Result};
pub use physics::{BallState, BallStatus, StepEvents, TableConfig, Team, WorldState};
