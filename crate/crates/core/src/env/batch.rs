//! Vectorized stepping of independent environment instances.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use super::environment::{EpisodeInfo, FoosballEnv};
use super::task::TaskSpec;
use crate::error::{Error, Result};
use crate::estimator::{FilterParams, SensorConfig};
use crate::physics::{StepEvents, TableConfig, Team};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of episode `episode` of instance `instance` under `master`.
pub fn episode_seed(master: u64, instance: u64, episode: u64) -> u64 {
    mix(mix(mix(master ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(instance)).wrapping_add(episode))
}

#[derive(Clone, Debug)]
pub struct BatchStep {
    /// Observations per side, shape `(N, obs_dim)`; Black's has zero rows in
    /// one-sided tasks.
    pub obs: [Array2<f64>; 2],
    pub rewards: [Array1<f64>; 2],
    pub dones: Vec<bool>,
    /// Summary of the episode that ended in this step, per instance.
    pub infos: Vec<Option<EpisodeInfo>>,
    pub events: Vec<StepEvents>,
}

struct Slot {
    env: FoosballEnv,
    episode: u64,
    obs: [Vec<f64>; 2],
}

/// `N` environments sharing a task and table. Instance `i` runs episodes
/// seeded from `(master_seed, i, episode)` and resets itself when done.
pub struct EnvBatch {
    spec: Arc<TaskSpec>,
    table: Arc<TableConfig>,
    master_seed: u64,
    slots: Vec<Slot>,
    pool: Option<rayon::ThreadPool>,
}

impl EnvBatch {
    pub fn new(spec: TaskSpec, table: TableConfig, n: usize, master_seed: u64) -> Result<Self> {
        Self::with_sensor(
            spec,
            table,
            n,
            master_seed,
            SensorConfig::default(),
            FilterParams::default(),
        )
    }

    pub fn with_sensor(
        spec: TaskSpec,
        table: TableConfig,
        n: usize,
        master_seed: u64,
        sensor: SensorConfig,
        params: FilterParams,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("batch needs at least one environment"));
        }
        let spec = Arc::new(spec);
        let table = Arc::new(table);
        let mut slots = Vec::with_capacity(n);
        for i in 0..n {
            let mut env =
                FoosballEnv::with_sensor(spec.clone(), table.clone(), sensor.clone(), params)?;
            let obs = env.reset(episode_seed(master_seed, i as u64, 0))?;
            slots.push(Slot {
                env,
                episode: 0,
                obs,
            });
        }
        Ok(EnvBatch {
            spec,
            table,
            master_seed,
            slots,
            pool: None,
        })
    }

    /// Runs steps on a dedicated pool of `workers` threads; `1` steps
    /// serially on the calling thread.
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        self.pool = if workers <= 1 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::invalid(format!("thread pool: {e}")))?,
            )
        };
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn table(&self) -> &TableConfig {
        &self.table
    }

    pub fn env(&self, i: usize) -> &FoosballEnv {
        &self.slots[i].env
    }

    /// Current observations, shape `(N, obs_dim)` per side.
    pub fn observations(&self) -> [Array2<f64>; 2] {
        let rows = |side: Team| {
            let dim = if side == Team::Black && !self.spec.kind.is_two_sided() {
                0
            } else {
                self.spec.obs_dim()
            };
            let n = if dim == 0 { 0 } else { self.slots.len() };
            let mut out = Array2::zeros((n, dim));
            if dim > 0 {
                for (mut row, slot) in out.rows_mut().into_iter().zip(&self.slots) {
                    row.assign(&ndarray::ArrayView1::from(&slot.obs[side.index()][..]));
                }
            }
            out
        };
        [rows(Team::White), rows(Team::Black)]
    }

    /// Steps every instance; finished instances start a new episode and
    /// report its first observation.
    pub fn step(
        &mut self,
        white: ArrayView2<f64>,
        black: Option<ArrayView2<f64>>,
    ) -> Result<BatchStep> {
        let n = self.slots.len();
        let check = |a: &ArrayView2<f64>, side: Team| -> Result<()> {
            let want = (n, self.spec.action_dim(side));
            if a.dim() != want {
                return Err(Error::contract(format!(
                    "{side:?} actions have shape {:?}, expected {want:?}",
                    a.dim()
                )));
            }
            Ok(())
        };
        check(&white, Team::White)?;
        if let Some(b) = &black {
            check(b, Team::Black)?;
        }
        let master = self.master_seed;
        let step_one = |(i, slot): (usize, &mut Slot)| -> Result<(Option<EpisodeInfo>, [f64; 2], bool, StepEvents)> {
            let w: Vec<f64> = white.row(i).to_vec();
            let b: Option<Vec<f64>> = black.as_ref().map(|b| b.row(i).to_vec());
            let out = slot.env.step(&w, b.as_deref())?;
            if out.done {
                slot.episode += 1;
                slot.obs = slot.env.reset(episode_seed(master, i as u64, slot.episode))?;
            } else {
                slot.obs = out.obs;
            }
            Ok((out.info, out.reward, out.done, out.events))
        };
        let results: Vec<Result<_>> = match &self.pool {
            Some(pool) => pool.install(|| {
                self.slots
                    .par_iter_mut()
                    .enumerate()
                    .map(step_one)
                    .collect()
            }),
            None => self.slots.iter_mut().enumerate().map(step_one).collect(),
        };
        let mut infos = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        let mut rewards = [Array1::zeros(n), Array1::zeros(n)];
        for (i, r) in results.into_iter().enumerate() {
            let (info, reward, done, ev) = r?;
            rewards[0][i] = reward[0];
            rewards[1][i] = reward[1];
            infos.push(info);
            dones.push(done);
            events.push(ev);
        }
        Ok(BatchStep {
            obs: self.observations(),
            rewards,
            dones,
            infos,
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::task::TaskKind;
    use ndarray::Array2;

    fn scripted(n: usize, dim: usize, t: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, dim), |(i, j)| {
            (((t * 7 + i * 3 + j) as f64) * 0.61).sin()
        })
    }

    #[test]
    fn single_instance_matches_serial_env() {
        let spec = TaskSpec::preset(TaskKind::Blocking);
        let table = TableConfig::default();
        let mut batch = EnvBatch::new(spec.clone(), table.clone(), 1, 11).unwrap();
        let mut env = FoosballEnv::new(Arc::new(spec), Arc::new(table)).unwrap();
        let mut episode = 0;
        let mut obs = env.reset(episode_seed(11, 0, 0)).unwrap();
        assert_eq!(batch.observations()[0].row(0).to_vec(), obs[0]);
        for t in 0..400 {
            let a = scripted(1, 1, t);
            let step = batch.step(a.view(), None).unwrap();
            let out = env.step(&a.row(0).to_vec(), None).unwrap();
            assert_eq!(step.rewards[0][0], out.reward[0]);
            assert_eq!(step.dones[0], out.done);
            if out.done {
                episode += 1;
                obs = env.reset(episode_seed(11, 0, episode)).unwrap();
            } else {
                obs = out.obs;
            }
            assert_eq!(step.obs[0].row(0).to_vec(), obs[0]);
        }
        assert!(episode > 0);
    }

    #[test]
    fn instance_trajectory_is_independent_of_batch_size() {
        let spec = TaskSpec::preset(TaskKind::ScoringResting);
        let table = TableConfig::default();
        let mut small = EnvBatch::new(spec.clone(), table.clone(), 2, 5).unwrap();
        let mut large = EnvBatch::new(spec, table, 6, 5).unwrap();
        for t in 0..200 {
            let a = scripted(6, 2, t);
            let s = small.step(a.slice(ndarray::s![..2, ..]), None).unwrap();
            let l = large.step(a.view(), None).unwrap();
            assert_eq!(s.obs[0].row(1), l.obs[0].row(1));
        }
    }

    #[test]
    fn shape_mismatch_is_contract_violation() {
        let mut batch = EnvBatch::new(
            TaskSpec::preset(TaskKind::Blocking),
            TableConfig::default(),
            3,
            0,
        )
        .unwrap();
        let bad = Array2::zeros((3, 2));
        assert!(matches!(
            batch.step(bad.view(), None),
            Err(Error::ContractViolation(_))
        ));
        let bad = Array2::zeros((2, 1));
        assert!(batch.step(bad.view(), None).is_err());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = TaskSpec::preset(TaskKind::KeeperVsKeeper);
        let table = TableConfig::default();
        let mut serial = EnvBatch::new(spec.clone(), table.clone(), 8, 3).unwrap();
        let mut parallel = EnvBatch::new(spec, table, 8, 3)
            .unwrap()
            .with_workers(4)
            .unwrap();
        for t in 0..150 {
            let w = scripted(8, 2, t);
            let b = scripted(8, 2, t + 1000);
            let s = serial.step(w.view(), Some(b.view())).unwrap();
            let p = parallel.step(w.view(), Some(b.view())).unwrap();
            assert_eq!(s.obs, p.obs);
            assert_eq!(s.rewards, p.rewards);
            assert_eq!(s.dones, p.dones);
        }
    }

    #[test]
    fn seeds_differ_across_instances_and_episodes() {
        let a = episode_seed(1, 0, 0);
        assert_ne!(a, episode_seed(1, 1, 0));
        assert_ne!(a, episode_seed(1, 0, 1));
        assert_ne!(a, episode_seed(2, 0, 0));
    }
}
