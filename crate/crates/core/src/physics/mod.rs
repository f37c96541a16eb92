//! Fixed-timestep 2.5D table physics.
//!
//! The table is modelled top-down: the ball is a disc rolling on the field,
//! each figurine foot is a disc whose x offset follows the rod angle and
//! which only touches the ball while the figurine hangs down.

pub mod ball;
pub mod config;
pub mod contact;
pub mod motor;
pub mod world;

pub use ball::{advance_free, apply_rolling_decel, collide_walls, BallState, BallStatus, Vec2};
pub use config::{JointLimits, RodConfig, RodRole, TableConfig, Team, NUM_RODS};
pub use contact::{foot_pose, resolve_collisions, wrap_angle, Contact, ContactDisc, StepEvents};
pub use motor::{motor_track, JointState};
pub use world::{step_world, RodMask, RodState, RodTargets, WorldState, DEFAULT_SUBSTEPS};
