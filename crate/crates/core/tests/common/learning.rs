//! Oracles for the learning code.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use foosball::ppo::{
    compute_gae, gaussian_log_prob, ppo_loss, ActorCritic, LossCoeffs, Minibatch, NetShape,
};

/// Advantage of every step as an explicit truncated sum of TD errors.
pub fn brute_force_gae(
    rewards: &Array2<f64>,
    values: &Array2<f64>,
    dones: &Array2<bool>,
    bootstrap: &Array1<f64>,
    gamma: f64,
    lam: f64,
) -> Array2<f64> {
    let (t_len, n) = rewards.dim();
    let value_at = |t: usize, i: usize| {
        if t == t_len {
            bootstrap[i]
        } else {
            values[(t, i)]
        }
    };
    let mut out = Array2::zeros((t_len, n));
    for i in 0..n {
        for t in 0..t_len {
            let mut sum = 0.0;
            for k in t..t_len {
                let next = if dones[(k, i)] {
                    0.0
                } else {
                    value_at(k + 1, i)
                };
                let delta = rewards[(k, i)] + gamma * next - values[(k, i)];
                sum += (gamma * lam).powi((k - t) as i32) * delta;
                if dones[(k, i)] {
                    break;
                }
            }
            out[(t, i)] = sum;
        }
    }
    out
}

/// Largest advantage error of `compute_gae` over random instances of up to
/// 64 steps.
pub fn gae_worst_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let t_len = rng.random_range(1..=64);
        let n = rng.random_range(1..=4);
        let gamma = rng.random_range(0.8..=1.0);
        let lam = rng.random_range(0.0..=1.0);
        let p_done = rng.random_range(0.0..0.3);
        let rewards = Array2::from_shape_fn((t_len, n), |_| rng.random_range(-1.0..1.0));
        let values = Array2::from_shape_fn((t_len, n), |_| rng.random_range(-1.0..1.0));
        let dones = Array2::from_shape_fn((t_len, n), |_| rng.random_bool(p_done));
        let bootstrap = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let (adv, ret) = compute_gae(
            rewards.view(),
            values.view(),
            dones.view(),
            bootstrap.view(),
            gamma,
            lam,
        )
        .unwrap();
        let oracle = brute_force_gae(&rewards, &values, &dones, &bootstrap, gamma, lam);
        for ((a, o), (r, v)) in adv.iter().zip(&oracle).zip(ret.iter().zip(&values)) {
            worst = worst.max((a - o).abs()).max((r - (o + v)).abs());
        }
    }
    worst
}

/// Worst relative gradient error over three coefficient sets, with and
/// without entropy and value clipping.
pub fn gradient_check() -> f64 {
    let base = LossCoeffs {
        clip: 0.2,
        value_coef: 2.0,
        entropy_coef: 0.0,
        clip_value: false,
    };
    [
        base,
        LossCoeffs {
            entropy_coef: 0.01,
            value_coef: 0.5,
            ..base
        },
        LossCoeffs {
            clip_value: true,
            ..base
        },
    ]
    .into_iter()
    .enumerate()
    .map(|(i, c)| max_relative_gradient_error(c, 3 + i as u64))
    .fold(0.0, f64::max)
}

struct Batch {
    obs: Array2<f64>,
    actions: Array2<f64>,
    old_log_prob: Array1<f64>,
    old_mean: Array2<f64>,
    old_log_std: Array1<f64>,
    advantages: Array1<f64>,
    old_values: Array1<f64>,
    returns: Array1<f64>,
}

impl Batch {
    fn view(&self) -> Minibatch<'_, f64> {
        Minibatch {
            obs: self.obs.view(),
            actions: self.actions.view(),
            old_log_prob: self.old_log_prob.view(),
            old_mean: self.old_mean.view(),
            old_log_std: self.old_log_std.view(),
            advantages: self.advantages.view(),
            old_values: self.old_values.view(),
            returns: self.returns.view(),
        }
    }
}

/// Rollout data from `old`, evaluated under a nearby `net`, so ratios are
/// close to one and clear of the clipping kinks.
fn toy_batch(old: &ActorCritic<f64>, rows: usize, rng: &mut ChaCha8Rng) -> Batch {
    let obs = Array2::from_shape_fn((rows, old.obs_dim()), |_| rng.random_range(-1.5..1.5));
    let fwd = old.forward(obs.view()).unwrap();
    let std: Vec<f64> = old.log_std.iter().map(|v| v.exp()).collect();
    let actions = Array2::from_shape_fn(fwd.mean.dim(), |(i, j)| {
        fwd.mean[(i, j)] + std[j] * rng.random_range(-1.0..1.0)
    });
    let ls = old.log_std.to_vec();
    let old_log_prob = (0..rows)
        .map(|i| gaussian_log_prob(&actions.row(i).to_vec(), &fwd.mean.row(i).to_vec(), &ls))
        .collect();
    Batch {
        obs,
        actions,
        old_log_prob,
        old_mean: fwd.mean.clone(),
        old_log_std: old.log_std.clone(),
        advantages: Array1::from_shape_fn(rows, |_| rng.random_range(-2.0..2.0)),
        old_values: fwd.value.clone(),
        returns: Array1::from_shape_fn(rows, |_| rng.random_range(-1.0..1.0)),
    }
}

pub fn max_relative_gradient_error(coeffs: LossCoeffs, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = NetShape::new(3, &[6, 5], 2);
    let old: ActorCritic<f64> = ActorCritic::init(&shape, seed);
    let mut net = old.clone();
    for t in net.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.01..0.01);
        }
    }
    net.log_std
        .mapv_inplace(|v| v - 0.3 + rng.random_range(-0.05..0.05));
    let mut batch = toy_batch(&old, 8, &mut rng);
    batch.old_log_std.mapv_inplace(|v| v - 0.3);
    let ls = batch.old_log_std.to_vec();
    for i in 0..8 {
        batch.old_log_prob[i] = gaussian_log_prob(
            &batch.actions.row(i).to_vec(),
            &batch.old_mean.row(i).to_vec(),
            &ls,
        );
    }

    let (_, grads) = ppo_loss(&net, &batch.view(), &coeffs).unwrap();
    let analytic: Vec<f64> = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter().copied())
        .collect();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let n_tensors = net.tensors().len();
    for ti in 0..n_tensors {
        let len = net.tensors()[ti].len();
        for j in 0..len {
            let mut plus = net.clone();
            plus.tensors_mut()[ti][j] += h;
            let mut minus = net.clone();
            minus.tensors_mut()[ti][j] -= h;
            let lp = ppo_loss(&plus, &batch.view(), &coeffs).unwrap().0.total;
            let lm = ppo_loss(&minus, &batch.view(), &coeffs).unwrap().0.total;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[k];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
            worst = worst.max(err);
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}
