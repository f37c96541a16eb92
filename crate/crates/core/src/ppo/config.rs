use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 3] = [256, 128, 64];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Adaptive,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lam: f64,
    pub lr_init: f64,
    pub lr_schedule: LrSchedule,
    pub kl_target: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub horizon: usize,
    pub mini_epochs: usize,
    pub minibatch_size: usize,
    pub num_envs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// Clip the value loss around the rollout values with the policy clip.
    pub clip_value: bool,
    /// Multiplier applied to env rewards before advantage estimation.
    pub reward_scale: f64,
    pub hidden: Vec<usize>,
    /// Starting value of every action log-std.
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.2,
            gamma: 0.99,
            lam: 0.95,
            lr_init: 1e-3,
            lr_schedule: LrSchedule::Adaptive,
            kl_target: 0.008,
            lr_min: 1e-6,
            lr_max: 1e-2,
            horizon: 16,
            mini_epochs: 8,
            minibatch_size: 512,
            num_envs: 256,
            value_coef: 2.0,
            entropy_coef: 0.0,
            max_grad_norm: 1.0,
            clip_value: false,
            reward_scale: 0.01,
            hidden: DEFAULT_HIDDEN.to_vec(),
            init_log_std: 0.0,
        }
    }
}

impl PpoConfig {
    /// Default hyperparameters for `num_envs` instances and `horizon` steps,
    /// with eight minibatches per epoch when the batch allows it.
    pub fn for_batch(num_envs: usize, horizon: usize) -> Self {
        let batch = num_envs * horizon;
        let minibatch_size = if batch.is_multiple_of(8) { batch / 8 } else { batch };
        PpoConfig {
            num_envs,
            horizon,
            minibatch_size,
            ..Default::default()
        }
    }

    pub fn batch_size(&self) -> usize {
        self.num_envs * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_init", self.lr_init),
            ("kl_target", self.kl_target),
            ("lr_min", self.lr_min),
            ("clip", self.clip),
            ("reward_scale", self.reward_scale),
            ("max_grad_norm", self.max_grad_norm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lr_min <= self.lr_max) {
            return Err(Error::invalid("lr_min exceeds lr_max"));
        }
        for (name, v) in [("gamma", self.gamma), ("lam", self.lam)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::invalid("loss coefficients must be non-negative"));
        }
        if self.horizon == 0
            || self.num_envs == 0
            || self.mini_epochs == 0
            || self.minibatch_size == 0
        {
            return Err(Error::invalid(
                "horizon, num_envs, mini_epochs and minibatch_size must be positive",
            ));
        }
        if !self.batch_size().is_multiple_of(self.minibatch_size) {
            return Err(Error::invalid(format!(
                "minibatch_size {} does not divide num_envs x horizon = {}",
                self.minibatch_size,
                self.batch_size()
            )));
        }
        if !(super::net::LOG_STD_MIN..=super::net::LOG_STD_MAX).contains(&self.init_log_std) {
            return Err(Error::invalid(format!(
                "init_log_std {} outside the log-std clamp",
                self.init_log_std
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid(
                "hidden layers must be non-empty and positive",
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(json))
    }
}

/// Learning-rate update from the measured policy KL.
pub fn adapt_lr(lr: f64, approx_kl: f64, cfg: &PpoConfig) -> f64 {
    match cfg.lr_schedule {
        LrSchedule::None => lr,
        LrSchedule::Adaptive => {
            let next = if approx_kl > 2.0 * cfg.kl_target {
                lr / 1.5
            } else if approx_kl < 0.5 * cfg.kl_target {
                lr * 1.5
            } else {
                lr
            };
            next.clamp(cfg.lr_min, cfg.lr_max)
        }
    }
}
