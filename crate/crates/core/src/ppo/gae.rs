use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Generalised advantage estimates over a `(T, N)` rollout.
///
/// `dones[t, i]` marks that the episode of instance `i` ended at step `t`, so
/// neither the value nor the advantage of step `t + 1` is bootstrapped.
/// `bootstrap` holds the value of the observation following the last step.
pub fn compute_gae(
    rewards: ArrayView2<f64>,
    values: ArrayView2<f64>,
    dones: ArrayView2<bool>,
    bootstrap: ArrayView1<f64>,
    gamma: f64,
    lam: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (t_len, n) = rewards.dim();
    if values.dim() != (t_len, n) || dones.dim() != (t_len, n) || bootstrap.len() != n {
        return Err(Error::contract(format!(
            "gae inputs misaligned: rewards {:?}, values {:?}, dones {:?}, bootstrap {}",
            rewards.dim(),
            values.dim(),
            dones.dim(),
            bootstrap.len()
        )));
    }
    let mut adv = Array2::zeros((t_len, n));
    let mut next_adv = Array1::<f64>::zeros(n);
    let mut next_value = bootstrap.to_owned();
    for t in (0..t_len).rev() {
        for i in 0..n {
            let live = if dones[(t, i)] { 0.0 } else { 1.0 };
            let delta = rewards[(t, i)] + gamma * next_value[i] * live - values[(t, i)];
            next_adv[i] = delta + gamma * lam * live * next_adv[i];
            adv[(t, i)] = next_adv[i];
            next_value[i] = values[(t, i)];
        }
    }
    let returns = &adv + &values;
    Ok((adv, returns))
}

/// Shifts and scales `x` to zero mean and unit variance.
pub fn normalize_advantages(x: &mut [f64]) {
    let n = x.len() as f64;
    if n == 0.0 {
        return;
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for v in x {
        *v = (*v - mean) / std;
    }
}
