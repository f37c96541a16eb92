//! The six training tasks as environments over the table simulation.

pub mod batch;
pub mod environment;
pub mod obs;
pub mod reward;
pub mod task;
pub mod trace;

pub use batch::{episode_seed, BatchStep, EnvBatch};
pub use environment::{
    ball_reachable, scale_action, EpisodeInfo, FoosballEnv, Outcome, StepOutput,
};
pub use obs::{build_observation, mirror_observation};
pub use reward::{compute_reward, figurine_distance, goal_distance};
pub use task::{JointKind, JointRef, ObsFlags, RewardCoeffs, TaskKind, TaskSpec, CONTROL_HZ};
pub use trace::{read_trace, TraceRecord, TraceWriter};
