use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::net::Scalar;

/// Normalised observations are clipped to this magnitude.
pub const OBS_CLIP: f64 = 5.0;
const VAR_EPS: f64 = 1e-8;

/// Running per-feature mean and variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl ObsNormalizer {
    pub fn new(dim: usize) -> Self {
        ObsNormalizer {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merges the moments of a batch of rows (parallel-variance update).
    pub fn update(&mut self, batch: ArrayView2<f64>) {
        let n = batch.nrows() as f64;
        if n == 0.0 {
            return;
        }
        let b_mean: Array1<f64> = batch.mean_axis(Axis(0)).expect("non-empty");
        let b_var: Array1<f64> = batch.var_axis(Axis(0), 0.0);
        let total = self.count + n;
        for j in 0..self.dim() {
            let delta = b_mean[j] - self.mean[j];
            let m2 =
                self.var[j] * self.count + b_var[j] * n + delta * delta * self.count * n / total;
            self.mean[j] += delta * n / total;
            self.var[j] = m2 / total;
        }
        self.count = total;
    }

    pub fn normalize<F: Scalar>(&self, batch: ArrayView2<f64>) -> Array2<F> {
        let mut out = Array2::zeros(batch.dim());
        for ((i, j), v) in batch.indexed_iter() {
            let z = (v - self.mean[j]) / (self.var[j] + VAR_EPS).sqrt();
            out[(i, j)] = F::of(z.clamp(-OBS_CLIP, OBS_CLIP));
        }
        out
    }
}
