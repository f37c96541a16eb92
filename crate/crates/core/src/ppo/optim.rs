use super::net::{ActorCritic, Scalar};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Global L2 norm over every gradient tensor.
pub fn grad_norm<F: Scalar>(grads: &ActorCritic<F>) -> f64 {
    grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g.f64() * g.f64())
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` so that their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<F: Scalar>(grads: &mut ActorCritic<F>, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm {
        let s = F::of(max_norm / (norm + 1e-6));
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g = *g * s);
        }
    }
    norm
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam<F> {
    pub m: ActorCritic<F>,
    pub v: ActorCritic<F>,
    pub t: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(params: &ActorCritic<F>) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ActorCritic<F>, grads: &ActorCritic<F>, lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let step = F::of(lr * c2.sqrt() / c1);
        let (b1, b2, eps) = (
            F::of(ADAM_BETA1),
            F::of(ADAM_BETA2),
            F::of(ADAM_EPS * c2.sqrt()),
        );
        let (one_b1, one_b2) = (F::one() - b1, F::one() - b2);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                p[i] = p[i] - step * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}
