//! Fixtures shared by the criterion benches.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use foosball::env::{EnvBatch, TaskKind, TaskSpec};
use foosball::{Result, TableConfig};

/// Batch sizes the throughput benches sweep over.
pub const BATCH_SIZES: [usize; 3] = [256, 1024, 4096];

pub fn batch(kind: TaskKind, n: usize, seed: u64) -> Result<EnvBatch> {
    EnvBatch::new(TaskSpec::preset(kind), TableConfig::default(), n, seed)
}

/// Uniform actions in [-1, 1].
pub fn random_actions(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..=1.0))
}
