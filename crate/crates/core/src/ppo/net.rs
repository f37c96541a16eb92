//! Actor-critic MLP with hand-written backpropagation.

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Element type of a network: `f32` for training, `f64` for gradient checks.
pub trait Scalar:
    LinalgScalar + Float + FromPrimitive + ScalarOperand + Debug + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }
    fn f64(self) -> f64 {
        self.to_f64().expect("representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F> {
    /// Shape `(inputs, outputs)`.
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    fn init(inputs: usize, outputs: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let scale = gain / (inputs as f64).sqrt();
        let w = Array2::from_shape_simple_fn((inputs, outputs), || {
            let z: f64 = StandardNormal.sample(rng);
            F::of(z * scale)
        });
        Dense {
            w,
            b: Array1::zeros(outputs),
        }
    }

    fn forward(&self, x: &ArrayView2<F>) -> Array2<F> {
        x.dot(&self.w) + &self.b
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub action_dim: usize,
}

impl NetShape {
    pub fn new(obs_dim: usize, hidden: &[usize], action_dim: usize) -> Self {
        NetShape {
            obs_dim,
            hidden: hidden.to_vec(),
            action_dim,
        }
    }
}

/// Shared tanh trunk feeding a tanh-squashed mean head and a scalar value
/// head, plus a state-independent log-std per action dimension.
///
/// The same type stores gradients and optimiser moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic<F> {
    pub trunk: Vec<Dense<F>>,
    pub actor: Dense<F>,
    pub critic: Dense<F>,
    pub log_std: Array1<F>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<F> {
    /// Trunk input followed by every hidden activation.
    pub acts: Vec<Array2<F>>,
    pub mean: Array2<F>,
    pub value: Array1<F>,
}

impl<F: Scalar> ActorCritic<F> {
    pub fn zeros(shape: &NetShape) -> Self {
        let mut trunk = Vec::with_capacity(shape.hidden.len());
        let mut prev = shape.obs_dim;
        for &h in &shape.hidden {
            trunk.push(Dense::zeros(prev, h));
            prev = h;
        }
        ActorCritic {
            trunk,
            actor: Dense::zeros(prev, shape.action_dim),
            critic: Dense::zeros(prev, 1),
            log_std: Array1::zeros(shape.action_dim),
        }
    }

    /// Scaled-Gaussian weights, zero biases, zero log-std. The actor head
    /// starts small so initial means sit near the joint midpoints.
    pub fn init(shape: &NetShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trunk = Vec::with_capacity(shape.hidden.len());
        let mut prev = shape.obs_dim;
        for &h in &shape.hidden {
            trunk.push(Dense::init(prev, h, 1.0, &mut rng));
            prev = h;
        }
        ActorCritic {
            trunk,
            actor: Dense::init(prev, shape.action_dim, 0.01, &mut rng),
            critic: Dense::init(prev, 1, 1.0, &mut rng),
            log_std: Array1::zeros(shape.action_dim),
        }
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            obs_dim: self
                .trunk
                .first()
                .map_or(self.actor.inputs(), Dense::inputs),
            hidden: self.trunk.iter().map(Dense::outputs).collect(),
            action_dim: self.actor.outputs(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.shape().obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.actor.outputs()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape())
    }

    /// Every parameter tensor in layer order: trunk (w, b)..., actor (w, b),
    /// critic (w, b), log-std.
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out = Vec::new();
        for d in self.trunk.iter().chain([&self.actor, &self.critic]) {
            out.push(d.w.as_slice().expect("standard layout"));
            out.push(d.b.as_slice().expect("standard layout"));
        }
        out.push(self.log_std.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = Vec::new();
        for d in self
            .trunk
            .iter_mut()
            .chain([&mut self.actor, &mut self.critic])
        {
            out.push(d.w.as_slice_mut().expect("standard layout"));
            out.push(d.b.as_slice_mut().expect("standard layout"));
        }
        out.push(self.log_std.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn clamp_log_std(&mut self) {
        let (lo, hi) = (F::of(LOG_STD_MIN), F::of(LOG_STD_MAX));
        self.log_std.mapv_inplace(|v| v.max(lo).min(hi));
    }

    pub fn cast<G: Scalar>(&self) -> ActorCritic<G> {
        let dense = |d: &Dense<F>| Dense {
            w: d.w.mapv(|v| G::of(v.f64())),
            b: d.b.mapv(|v| G::of(v.f64())),
        };
        ActorCritic {
            trunk: self.trunk.iter().map(dense).collect(),
            actor: dense(&self.actor),
            critic: dense(&self.critic),
            log_std: self.log_std.mapv(|v| G::of(v.f64())),
        }
    }

    /// Batched forward pass over already-normalised observations.
    pub fn forward(&self, obs: ArrayView2<F>) -> Result<ForwardCache<F>> {
        if obs.ncols() != self.obs_dim() {
            return Err(Error::contract(format!(
                "observation width {} does not match network input {}",
                obs.ncols(),
                self.obs_dim()
            )));
        }
        let mut acts = Vec::with_capacity(self.trunk.len() + 1);
        acts.push(obs.to_owned());
        for layer in &self.trunk {
            let mut z = layer.forward(&acts.last().expect("input").view());
            z.mapv_inplace(Float::tanh);
            acts.push(z);
        }
        let h = acts.last().expect("input").view();
        let mean = self.actor.forward(&h).mapv(Float::tanh);
        let value = self.critic.forward(&h).index_axis_move(Axis(1), 0);
        Ok(ForwardCache { acts, mean, value })
    }

    /// Gradients of a loss given its gradients with respect to the squashed
    /// mean and the value. The log-std slot is left at zero.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        d_mean: &Array2<F>,
        d_value: &Array1<F>,
    ) -> Self {
        let mut grads = self.zeros_like();
        let h = cache.acts.last().expect("input");
        let one = F::one();
        let d_pre = d_mean * &cache.mean.mapv(|m| one - m * m);
        let d_v = d_value.view().insert_axis(Axis(1));
        grads.actor.w = standard(h.t().dot(&d_pre));
        grads.actor.b = d_pre.sum_axis(Axis(0));
        grads.critic.w = standard(h.t().dot(&d_v));
        grads.critic.b = d_v.sum_axis(Axis(0));
        let mut d_h = d_pre.dot(&self.actor.w.t()) + d_v.dot(&self.critic.w.t());
        for (i, layer) in self.trunk.iter().enumerate().rev() {
            let out = &cache.acts[i + 1];
            let d_z = d_h * &out.mapv(|a| one - a * a);
            let input = &cache.acts[i];
            grads.trunk[i].w = standard(input.t().dot(&d_z));
            grads.trunk[i].b = d_z.sum_axis(Axis(0));
            if i > 0 {
                d_h = d_z.dot(&layer.w.t());
            } else {
                break;
            }
        }
        grads
    }
}

fn standard<F: Scalar>(a: Array2<F>) -> Array2<F> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}
