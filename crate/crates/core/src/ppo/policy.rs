use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::loss::gaussian_log_prob;
use super::net::{ActorCritic, NetShape};
use super::normalizer::ObsNormalizer;
use crate::error::Result;

/// Network plus the observation statistics it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub net: ActorCritic<f32>,
    pub norm: ObsNormalizer,
}

#[derive(Clone, Debug)]
pub struct PolicyOutput {
    /// Squashed action means, in `[-1, 1]`.
    pub mean: Array2<f64>,
    pub log_std: Vec<f64>,
    pub value: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct Sampled {
    /// Normalised network inputs.
    pub obs: Array2<f32>,
    pub mean: Array2<f32>,
    /// Unclamped Gaussian samples.
    pub actions: Array2<f32>,
    pub log_prob: Array1<f32>,
    pub value: Array1<f32>,
}

impl Policy {
    pub fn new(shape: &NetShape, seed: u64) -> Self {
        Policy {
            net: ActorCritic::init(shape, seed),
            norm: ObsNormalizer::new(shape.obs_dim),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.obs_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.net.action_dim()
    }

    /// Means, log-std and values for raw observations.
    pub fn forward(&self, obs: ArrayView2<f64>) -> Result<PolicyOutput> {
        let x = self.normalize(obs)?;
        let fwd = self.net.forward(x.view())?;
        Ok(PolicyOutput {
            mean: fwd.mean.mapv(f64::from),
            log_std: self.net.log_std.iter().map(|&v| f64::from(v)).collect(),
            value: fwd.value.mapv(f64::from),
        })
    }

    /// Deterministic actions: the squashed means.
    pub fn act(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(obs)?.mean)
    }

    pub fn normalize(&self, obs: ArrayView2<f64>) -> Result<Array2<f32>> {
        if obs.ncols() != self.norm.dim() {
            return Err(crate::Error::contract(format!(
                "observation width {} does not match policy input {}",
                obs.ncols(),
                self.norm.dim()
            )));
        }
        Ok(self.norm.normalize(obs))
    }

    /// Gaussian exploration around the squashed means.
    pub fn sample<R: Rng + ?Sized>(&self, obs: ArrayView2<f64>, rng: &mut R) -> Result<Sampled> {
        let x = self.normalize(obs)?;
        let fwd = self.net.forward(x.view())?;
        let std: Vec<f32> = self.net.log_std.iter().map(|v| v.exp()).collect();
        let log_std: Vec<f64> = self.net.log_std.iter().map(|&v| f64::from(v)).collect();
        let (n, a) = fwd.mean.dim();
        let mut actions = Array2::<f32>::zeros((n, a));
        let mut log_prob = Array1::<f32>::zeros(n);
        for i in 0..n {
            for j in 0..a {
                let eps: f32 = rng.sample(StandardNormal);
                actions[(i, j)] = fwd.mean[(i, j)] + std[j] * eps;
            }
            let act: Vec<f64> = actions.row(i).iter().map(|&v| f64::from(v)).collect();
            let mean: Vec<f64> = fwd.mean.row(i).iter().map(|&v| f64::from(v)).collect();
            log_prob[i] = gaussian_log_prob(&act, &mean, &log_std) as f32;
        }
        Ok(Sampled {
            obs: x,
            mean: fwd.mean,
            actions,
            log_prob,
            value: fwd.value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_is_seeded() {
        let p = Policy::new(&NetShape::new(3, &[8], 2), 4);
        let obs = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 * 0.1);
        let a = p
            .sample(obs.view(), &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let b = p
            .sample(obs.view(), &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.log_prob, b.log_prob);
    }

    #[test]
    fn deterministic_action_is_mean() {
        let p = Policy::new(&NetShape::new(3, &[8], 2), 4);
        let obs = Array2::from_elem((2, 3), 0.5);
        let out = p.forward(obs.view()).unwrap();
        assert_eq!(p.act(obs.view()).unwrap(), out.mean);
        assert!(p.act(Array2::zeros((1, 4)).view()).is_err());
    }
}
