use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{adapt_lr, PpoConfig};
use super::gae::{compute_gae, normalize_advantages};
use super::loss::{ppo_loss, LossCoeffs, LossStats, Minibatch};
use super::optim::{clip_grad_norm, Adam};
use super::policy::{Policy, Sampled};
use crate::error::{Error, Result};

/// One rollout of `horizon` steps over `num_envs` instances. Row `t * N + i`
/// of the flat arrays holds step `t` of instance `i`.
#[derive(Clone, Debug)]
pub struct RolloutBuffer {
    pub horizon: usize,
    pub num_envs: usize,
    pub obs: Array2<f32>,
    pub raw_obs: Array2<f64>,
    pub actions: Array2<f32>,
    pub log_prob: Array1<f32>,
    pub mean: Array2<f32>,
    pub log_std: Array1<f32>,
    /// `(T, N)` series.
    pub values: Array2<f64>,
    pub rewards: Array2<f64>,
    pub dones: Array2<bool>,
    pub bootstrap: Array1<f64>,
    filled: usize,
}

impl RolloutBuffer {
    pub fn new(horizon: usize, num_envs: usize, obs_dim: usize, action_dim: usize) -> Self {
        let rows = horizon * num_envs;
        RolloutBuffer {
            horizon,
            num_envs,
            obs: Array2::zeros((rows, obs_dim)),
            raw_obs: Array2::zeros((rows, obs_dim)),
            actions: Array2::zeros((rows, action_dim)),
            log_prob: Array1::zeros(rows),
            mean: Array2::zeros((rows, action_dim)),
            log_std: Array1::zeros(action_dim),
            values: Array2::zeros((horizon, num_envs)),
            rewards: Array2::zeros((horizon, num_envs)),
            dones: Array2::from_elem((horizon, num_envs), false),
            bootstrap: Array1::zeros(num_envs),
            filled: 0,
        }
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.horizon
    }

    pub fn clear(&mut self) {
        self.filled = 0;
    }

    /// Stores step `t = filled` given the policy sample, the raw observations
    /// it acted on and the environment's (scaled) rewards and dones.
    pub fn push(
        &mut self,
        sampled: &Sampled,
        raw_obs: &Array2<f64>,
        rewards: &Array1<f64>,
        dones: &[bool],
    ) -> Result<()> {
        if self.is_full() {
            return Err(Error::contract("rollout buffer already full"));
        }
        let t = self.filled;
        let n = self.num_envs;
        if sampled.obs.nrows() != n || rewards.len() != n || dones.len() != n {
            return Err(Error::contract(
                "rollout step has the wrong number of instances",
            ));
        }
        let rows = s![t * n..(t + 1) * n, ..];
        self.obs.slice_mut(rows).assign(&sampled.obs);
        self.raw_obs.slice_mut(rows).assign(raw_obs);
        self.actions.slice_mut(rows).assign(&sampled.actions);
        self.mean.slice_mut(rows).assign(&sampled.mean);
        self.log_prob
            .slice_mut(s![t * n..(t + 1) * n])
            .assign(&sampled.log_prob);
        self.values
            .row_mut(t)
            .assign(&sampled.value.mapv(f64::from));
        self.rewards.row_mut(t).assign(rewards);
        for (d, &v) in self.dones.row_mut(t).iter_mut().zip(dones) {
            *d = v;
        }
        self.filled += 1;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    /// Learning rate for the next update.
    pub lr: f64,
    pub minibatches: usize,
}

/// Runs `mini_epochs` passes of shuffled minibatch steps over a full buffer,
/// adapts the learning rate and folds the buffer's raw observations into the
/// normaliser.
///
/// On a non-finite loss the policy and optimiser are left as they were
/// before the call.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    opt: &mut Adam<f32>,
    lr: &mut f64,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if !buf.is_full() {
        return Err(Error::contract("ppo update needs a full rollout buffer"));
    }
    let rows = buf.horizon * buf.num_envs;
    if !rows.is_multiple_of(cfg.minibatch_size) {
        return Err(Error::invalid("minibatch size does not divide the rollout"));
    }
    let (adv, returns) = compute_gae(
        buf.rewards.view(),
        buf.values.view(),
        buf.dones.view(),
        buf.bootstrap.view(),
        cfg.gamma,
        cfg.lam,
    )?;
    let mut adv: Vec<f64> = adv.iter().copied().collect();
    normalize_advantages(&mut adv);
    let adv = Array1::from_iter(adv.iter().map(|&v| v as f32));
    let returns = Array1::from_iter(returns.iter().map(|&v| v as f32));
    let old_values = Array1::from_iter(buf.values.iter().map(|&v| v as f32));
    let coeffs = LossCoeffs {
        clip: cfg.clip,
        value_coef: cfg.value_coef,
        entropy_coef: cfg.entropy_coef,
        clip_value: cfg.clip_value,
    };

    let saved = (policy.net.clone(), opt.clone(), *lr);
    let mut stats = UpdateStats::default();
    let mut index: Vec<usize> = (0..rows).collect();
    let mut epoch_kl = 0.0;
    for _ in 0..cfg.mini_epochs {
        epoch_kl = 0.0;
        index.shuffle(rng);
        for chunk in index.chunks(cfg.minibatch_size) {
            let obs = buf.obs.select(Axis(0), chunk);
            let actions = buf.actions.select(Axis(0), chunk);
            let old_mean = buf.mean.select(Axis(0), chunk);
            let old_log_prob = buf.log_prob.select(Axis(0), chunk);
            let advantages = adv.select(Axis(0), chunk);
            let old_v = old_values.select(Axis(0), chunk);
            let ret = returns.select(Axis(0), chunk);
            let mb = Minibatch {
                obs: obs.view(),
                actions: actions.view(),
                old_log_prob: old_log_prob.view(),
                old_mean: old_mean.view(),
                old_log_std: buf.log_std.view(),
                advantages: advantages.view(),
                old_values: old_v.view(),
                returns: ret.view(),
            };
            let (ls, mut grads): (LossStats, _) = match ppo_loss(&policy.net, &mb, &coeffs) {
                Ok(v) => v,
                Err(e) => {
                    (policy.net, *opt, *lr) = saved;
                    return Err(e);
                }
            };
            let norm = clip_grad_norm(&mut grads, cfg.max_grad_norm);
            if !norm.is_finite() {
                (policy.net, *opt, *lr) = saved;
                return Err(Error::NonFinite(format!("gradient norm is {norm}")));
            }
            opt.step(&mut policy.net, &grads, *lr);
            policy.net.clamp_log_std();
            epoch_kl += ls.approx_kl;
            stats.policy_loss += ls.policy_loss;
            stats.value_loss += ls.value_loss;
            stats.entropy += ls.entropy;
            stats.approx_kl += ls.approx_kl;
            stats.clip_fraction += ls.clip_fraction;
            stats.grad_norm += norm;
            stats.minibatches += 1;
        }
    }
    // KL is measured against the rollout policy, so the last epoch's mean is
    // the divergence reached by the whole update.
    *lr = adapt_lr(*lr, epoch_kl / (rows / cfg.minibatch_size) as f64, cfg);
    let k = stats.minibatches as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.clip_fraction /= k;
    stats.grad_norm /= k;
    stats.lr = *lr;
    policy.norm.update(buf.raw_obs.view());
    Ok(stats)
}
