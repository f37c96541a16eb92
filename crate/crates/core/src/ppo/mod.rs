//! Actor-critic PPO trained from scratch, with a self-play opponent league.

pub mod checkpoint;
pub mod config;
pub mod gae;
pub mod league;
pub mod loss;
pub mod net;
pub mod normalizer;
pub mod optim;
pub mod policy;
pub mod train;
pub mod update;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_for_task, save_checkpoint,
    CheckpointMeta,
};
pub use config::{adapt_lr, LrSchedule, PpoConfig};
pub use gae::{compute_gae, normalize_advantages};
pub use league::{LeagueConfig, MatchResult, OpponentPool, Promotion};
pub use loss::{gaussian_kl, gaussian_log_prob, ppo_loss, LossCoeffs, LossStats, Minibatch};
pub use net::{ActorCritic, Dense, ForwardCache, NetShape, Scalar};
pub use normalizer::ObsNormalizer;
pub use optim::{clip_grad_norm, grad_norm, Adam};
pub use policy::{Policy, PolicyOutput, Sampled};
pub use train::{
    evaluate, EvalConfig, EvalReport, TrainConfig, TrainReport, Trainer, UpdateMetrics,
};
pub use update::{ppo_update, RolloutBuffer, UpdateStats};
