//! Clipped-surrogate PPO loss and its analytic gradient.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::net::{ActorCritic, Scalar};
use crate::error::{Error, Result};

/// Diagonal-Gaussian log-density of `action` with mean `mean`.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// KL divergence from the old to the new diagonal Gaussian.
pub fn gaussian_kl(old_mean: &[f64], old_log_std: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    (0..mean.len())
        .map(|j| {
            let (so2, sn2) = ((2.0 * old_log_std[j]).exp(), (2.0 * log_std[j]).exp());
            let dm = old_mean[j] - mean[j];
            log_std[j] - old_log_std[j] + (so2 + dm * dm) / (2.0 * sn2) - 0.5
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCoeffs {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub clip_value: bool,
}

/// Rows of a rollout selected for one gradient step.
#[derive(Clone, Copy, Debug)]
pub struct Minibatch<'a, F> {
    /// Normalised observations.
    pub obs: ArrayView2<'a, F>,
    pub actions: ArrayView2<'a, F>,
    pub old_log_prob: ArrayView1<'a, F>,
    pub old_mean: ArrayView2<'a, F>,
    pub old_log_std: ArrayView1<'a, F>,
    pub advantages: ArrayView1<'a, F>,
    pub old_values: ArrayView1<'a, F>,
    pub returns: ArrayView1<'a, F>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss value, statistics and gradient with respect to every parameter.
pub fn ppo_loss<F: Scalar>(
    net: &ActorCritic<F>,
    mb: &Minibatch<'_, F>,
    k: &LossCoeffs,
) -> Result<(LossStats, ActorCritic<F>)> {
    let m = mb.obs.nrows();
    let a_dim = net.action_dim();
    if m == 0 {
        return Err(Error::contract("empty minibatch"));
    }
    let fwd = net.forward(mb.obs)?;
    let log_std: Vec<f64> = net.log_std.iter().map(|v| v.f64()).collect();
    let old_log_std: Vec<f64> = mb.old_log_std.iter().map(|v| v.f64()).collect();
    let inv_m = 1.0 / m as f64;

    let mut d_mean = Array2::<F>::zeros((m, a_dim));
    let mut d_value = Array1::<F>::zeros(m);
    let mut d_log_std = vec![0.0; a_dim];
    let mut stats = LossStats::default();
    let mut clipped = 0usize;

    let mut mean = vec![0.0; a_dim];
    let mut action = vec![0.0; a_dim];
    let mut old_mean = vec![0.0; a_dim];
    for i in 0..m {
        for j in 0..a_dim {
            mean[j] = fwd.mean[(i, j)].f64();
            action[j] = mb.actions[(i, j)].f64();
            old_mean[j] = mb.old_mean[(i, j)].f64();
        }
        let adv = mb.advantages[i].f64();
        let log_p = gaussian_log_prob(&action, &mean, &log_std);
        let ratio = (log_p - mb.old_log_prob[i].f64()).exp();
        let unclipped = ratio * adv;
        let clipped_ratio = ratio.clamp(1.0 - k.clip, 1.0 + k.clip);
        let surrogate = unclipped.min(clipped_ratio * adv);
        stats.policy_loss -= surrogate * inv_m;
        if (ratio - 1.0).abs() > k.clip {
            clipped += 1;
        }
        // d(-surrogate)/d(log p); zero when the clipped branch is the minimum.
        let g = if unclipped <= clipped_ratio * adv {
            -adv * ratio * inv_m
        } else {
            0.0
        };
        if g != 0.0 {
            for j in 0..a_dim {
                let sigma = log_std[j].exp();
                let z = (action[j] - mean[j]) / sigma;
                d_mean[(i, j)] = F::of(g * z / sigma);
                d_log_std[j] += g * (z * z - 1.0);
            }
        }
        stats.approx_kl += gaussian_kl(&old_mean, &old_log_std, &mean, &log_std) * inv_m;

        let v = fwd.value[i].f64();
        let ret = mb.returns[i].f64();
        let err = v - ret;
        let (loss_v, grad_v) = if k.clip_value {
            let v_old = mb.old_values[i].f64();
            let dv = (v - v_old).clamp(-k.clip, k.clip);
            let err_c = v_old + dv - ret;
            if err * err >= err_c * err_c {
                (err * err, err)
            } else if (v - v_old).abs() < k.clip {
                (err_c * err_c, err_c)
            } else {
                (err_c * err_c, 0.0)
            }
        } else {
            (err * err, err)
        };
        stats.value_loss += 0.5 * loss_v * inv_m;
        d_value[i] = F::of(k.value_coef * grad_v * inv_m);
    }
    let half_log_2pie = 0.5 * (2.0 * PI * std::f64::consts::E).ln();
    stats.entropy = log_std.iter().map(|ls| ls + half_log_2pie).sum();
    for d in &mut d_log_std {
        *d -= k.entropy_coef;
    }
    stats.clip_fraction = clipped as f64 * inv_m;
    stats.total =
        stats.policy_loss + k.value_coef * stats.value_loss - k.entropy_coef * stats.entropy;
    if !stats.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "ppo loss is {} ({stats:?})",
            stats.total
        )));
    }
    let mut grads = net.backward(&fwd, &d_mean, &d_value);
    grads.log_std = d_log_std.iter().map(|&d| F::of(d)).collect();
    Ok((stats, grads))
}
