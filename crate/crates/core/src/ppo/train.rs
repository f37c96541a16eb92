//! Collect, estimate, update: the training loop and policy evaluation.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{save_checkpoint, CheckpointMeta};
use super::config::PpoConfig;
use super::league::{LeagueConfig, MatchResult, OpponentPool, Promotion};
use super::net::NetShape;
use super::optim::Adam;
use super::policy::Policy;
use super::update::{ppo_update, RolloutBuffer, UpdateStats};
use crate::env::reward::event_reward;
use crate::env::{EnvBatch, Outcome, TaskSpec};
use crate::error::{Error, Result};
use crate::estimator::{FilterParams, SensorConfig};
use crate::physics::{TableConfig, Team};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: TaskSpec,
    pub ppo: PpoConfig,
    pub seed: u64,
    /// Upper bound on policy updates.
    pub updates: usize,
    pub league: LeagueConfig,
    /// Environment worker threads; 1 steps serially and is bit-reproducible.
    pub workers: usize,
    /// Stop once the success rate reaches this value: the evaluated rate
    /// when `eval_every` is set, the rolling training rate otherwise.
    pub stop_at_success: Option<f64>,
    /// Evaluate the deterministic policy every this many updates.
    pub eval_every: Option<usize>,
    pub eval: EvalConfig,
    /// Completed episodes in the rolling success window.
    pub success_window: usize,
    /// Stop once this many opponent promotions have happened.
    pub stop_at_promotions: Option<usize>,
    /// Write a checkpoint every this many updates (and at promotions) when an
    /// output directory is set.
    pub checkpoint_every: Option<usize>,
    pub sensor: SensorConfig,
    pub filter: FilterParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: TaskSpec::preset(crate::env::TaskKind::Blocking),
            ppo: PpoConfig::default(),
            seed: 0,
            updates: 500,
            league: LeagueConfig::default(),
            workers: 1,
            stop_at_success: None,
            eval_every: None,
            eval: EvalConfig::default(),
            success_window: 500,
            stop_at_promotions: None,
            checkpoint_every: None,
            sensor: SensorConfig::default(),
            filter: FilterParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.ppo.validate()?;
        self.league.validate()?;
        self.sensor.validate()?;
        if self.success_window == 0 {
            return Err(Error::invalid("success_window must be positive"));
        }
        Ok(())
    }

    pub fn net_shape(&self) -> NetShape {
        NetShape::new(
            self.task.obs_dim(),
            &self.ppo.hidden,
            self.task.action_dim(Team::White),
        )
    }
}

/// One JSONL metrics record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update: u64,
    pub env_steps: u64,
    #[serde(flatten)]
    pub stats: UpdateStats,
    /// Episodes finished during this update's rollout.
    pub episodes: usize,
    pub success_rate: f64,
    pub failure_rate: f64,
    pub draw_rate: f64,
    pub rolling_success: f64,
    pub mean_reward: f64,
    pub mean_episode_length: f64,
    /// Self-play only: league window statistics and pool state.
    pub league_win_rate: f64,
    pub promotions: usize,
    pub opponent: usize,
    pub zero_sum_ticks: u64,
    pub zero_sum_violations: u64,
    /// Deterministic evaluation success, on evaluation updates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_success: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub updates: usize,
    pub env_steps: u64,
    pub final_rolling_success: f64,
    pub best_rolling_success: f64,
    pub last_eval_success: Option<f64>,
    pub best_eval_success: Option<f64>,
    /// First update at which the success target was reached.
    pub reached_target_at: Option<u64>,
    pub promotions: Vec<Promotion>,
    pub zero_sum_ticks: u64,
    pub zero_sum_violations: u64,
}

pub fn outcome_result(o: Outcome) -> MatchResult {
    match o {
        Outcome::Success => MatchResult::Win,
        Outcome::Failure => MatchResult::Loss,
        Outcome::Draw => MatchResult::Draw,
    }
}

pub struct Trainer {
    cfg: TrainConfig,
    batch: EnvBatch,
    policy: Policy,
    opt: Adam<f32>,
    lr: f64,
    rng: ChaCha8Rng,
    update: u64,
    env_steps: u64,
    pool: Option<OpponentPool<Policy>>,
    rolling: VecDeque<Outcome>,
    metrics: Option<BufWriter<File>>,
    out_dir: Option<PathBuf>,
    zero_sum_ticks: u64,
    zero_sum_violations: u64,
    reached_target_at: Option<u64>,
    best_rolling: f64,
    last_eval: Option<f64>,
    best_eval: Option<f64>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let batch = EnvBatch::with_sensor(
            cfg.task.clone(),
            TableConfig::default(),
            cfg.ppo.num_envs,
            cfg.seed,
            cfg.sensor.clone(),
            cfg.filter,
        )?
        .with_workers(cfg.workers)?;
        let mut policy = Policy::new(&cfg.net_shape(), cfg.seed ^ 0x5eed_0001);
        policy.net.log_std.fill(cfg.ppo.init_log_std as f32);
        let pool = if cfg.task.kind.is_two_sided() {
            Some(OpponentPool::new(cfg.league.clone(), policy.clone())?)
        } else {
            None
        };
        Ok(Trainer {
            opt: Adam::new(&policy.net),
            lr: cfg.ppo.lr_init,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002),
            batch,
            policy,
            update: 0,
            env_steps: 0,
            pool,
            rolling: VecDeque::new(),
            metrics: None,
            out_dir: None,
            zero_sum_ticks: 0,
            zero_sum_violations: 0,
            reached_target_at: None,
            best_rolling: 0.0,
            last_eval: None,
            best_eval: None,
            cfg,
        })
    }

    /// Writes `metrics.jsonl` and checkpoints into `dir`.
    pub fn with_output_dir(mut self, dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.metrics = Some(BufWriter::new(File::create(dir.join("metrics.jsonl"))?));
        self.out_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn pool(&self) -> Option<&OpponentPool<Policy>> {
        self.pool.as_ref()
    }

    pub fn updates_done(&self) -> u64 {
        self.update
    }

    pub fn rolling_success(&self) -> f64 {
        if self.rolling.is_empty() {
            return 0.0;
        }
        self.rolling
            .iter()
            .filter(|&&o| o == Outcome::Success)
            .count() as f64
            / self.rolling.len() as f64
    }

    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            task: self.cfg.task.clone(),
            config_hash: self.cfg.ppo.hash(),
            update: self.update,
            seed: self.cfg.seed,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(path, &self.policy, &self.meta())
    }

    /// One rollout followed by one PPO update.
    pub fn step(&mut self) -> Result<UpdateMetrics> {
        let ppo = &self.cfg.ppo;
        let (t_len, n) = (ppo.horizon, ppo.num_envs);
        let mut buf = RolloutBuffer::new(t_len, n, self.policy.obs_dim(), self.policy.action_dim());
        buf.log_std = self.policy.net.log_std.clone();
        let opponent = self.pool.as_ref().map(|p| p.pick(&mut self.rng));
        let mut m = UpdateMetrics {
            update: self.update,
            ..Default::default()
        };
        let (mut successes, mut failures, mut draws, mut length_sum) =
            (0usize, 0usize, 0usize, 0u64);
        let mut reward_sum = 0.0;
        let mut promoted = Vec::new();
        let [mut obs_w, mut obs_b] = self.batch.observations();
        for _ in 0..t_len {
            let sampled = self.policy.sample(obs_w.view(), &mut self.rng)?;
            let white = sampled.actions.mapv(|v| f64::from(v).clamp(-1.0, 1.0));
            let black = match (opponent, &self.pool) {
                (Some(k), Some(pool)) => {
                    let s = pool.get(k).sample(obs_b.view(), &mut self.rng)?;
                    Some(s.actions.mapv(|v| f64::from(v).clamp(-1.0, 1.0)))
                }
                _ => None,
            };
            let out = self
                .batch
                .step(white.view(), black.as_ref().map(|b| b.view()))?;
            let scaled = &out.rewards[0] * ppo.reward_scale;
            reward_sum += out.rewards[0].sum();
            buf.push(&sampled, &obs_w, &scaled, &out.dones)?;
            if self.cfg.task.kind.is_two_sided() {
                let coeffs = &self.cfg.task.reward_coeffs;
                for ev in &out.events {
                    self.zero_sum_ticks += 1;
                    let sum = event_reward(ev, Team::White, coeffs, None)
                        + event_reward(ev, Team::Black, coeffs, None);
                    if sum != 0.0 {
                        self.zero_sum_violations += 1;
                    }
                }
            }
            for info in out.infos.iter().flatten() {
                match info.outcome {
                    Outcome::Success => successes += 1,
                    Outcome::Failure => failures += 1,
                    Outcome::Draw => draws += 1,
                }
                length_sum += u64::from(info.length);
                self.rolling.push_back(info.outcome);
                if self.rolling.len() > self.cfg.success_window {
                    self.rolling.pop_front();
                }
                if let Some(pool) = &mut self.pool {
                    let snapshot = || self.policy.clone();
                    if let Some(p) =
                        pool.record(outcome_result(info.outcome), self.update, snapshot)
                    {
                        promoted.push(p);
                    }
                }
            }
            [obs_w, obs_b] = out.obs;
        }
        let boot = self.policy.forward(obs_w.view())?;
        buf.bootstrap = boot.value;
        let stats = ppo_update(
            &mut self.policy,
            &mut self.opt,
            &mut self.lr,
            &buf,
            ppo,
            &mut self.rng,
        )?;

        self.update += 1;
        self.env_steps += (t_len * n) as u64;
        let episodes = successes + failures + draws;
        let frac = |k: usize| {
            if episodes == 0 {
                0.0
            } else {
                k as f64 / episodes as f64
            }
        };
        let rolling = self.rolling_success();
        if self.rolling.len() >= self.cfg.success_window {
            self.best_rolling = self.best_rolling.max(rolling);
        }
        m.env_steps = self.env_steps;
        m.stats = stats;
        m.episodes = episodes;
        m.success_rate = frac(successes);
        m.failure_rate = frac(failures);
        m.draw_rate = frac(draws);
        m.rolling_success = rolling;
        m.mean_reward = reward_sum / (t_len * n) as f64;
        m.mean_episode_length = if episodes == 0 {
            0.0
        } else {
            length_sum as f64 / episodes as f64
        };
        if let Some(pool) = &self.pool {
            m.league_win_rate = pool.win_rate();
            m.promotions = pool.promotions().len();
            m.opponent = pool.active_index();
        }
        m.zero_sum_ticks = self.zero_sum_ticks;
        m.zero_sum_violations = self.zero_sum_violations;
        if self
            .cfg
            .eval_every
            .is_some_and(|k| k > 0 && self.update.is_multiple_of(k as u64))
        {
            let opponent = self.pool.as_ref().map(|p| p.active());
            let r = evaluate(&self.policy, &self.cfg.task, opponent, &self.cfg.eval)?;
            m.eval_success = Some(r.success_rate);
            self.last_eval = Some(r.success_rate);
            self.best_eval = Some(
                self.best_eval
                    .map_or(r.success_rate, |b| b.max(r.success_rate)),
            );
        }
        if let Some(w) = &mut self.metrics {
            serde_json::to_writer(&mut *w, &m)?;
            w.write_all(b"\n")?;
        }
        if let Some(dir) = self.out_dir.clone() {
            let periodic = self
                .cfg
                .checkpoint_every
                .is_some_and(|k| k > 0 && self.update.is_multiple_of(k as u64));
            if periodic {
                self.save(dir.join(format!("update_{:06}.ckpt", self.update)))?;
            }
            for p in &promoted {
                self.save(dir.join(format!("opponent_{:03}.ckpt", p.pool_index)))?;
            }
        }
        Ok(m)
    }

    fn target_reached(&self) -> bool {
        let success = self
            .cfg
            .stop_at_success
            .is_some_and(|s| match self.cfg.eval_every {
                Some(_) => self.last_eval.is_some_and(|e| e >= s),
                None => {
                    self.rolling.len() >= self.cfg.success_window && self.rolling_success() >= s
                }
            });
        let promotions = match (self.cfg.stop_at_promotions, &self.pool) {
            (Some(k), Some(pool)) => pool.promotions().len() >= k,
            _ => false,
        };
        success || promotions
    }

    /// Trains until the update budget is spent or a stop target is met.
    pub fn run(&mut self) -> Result<TrainReport> {
        while (self.update as usize) < self.cfg.updates {
            self.step()?;
            if self.target_reached() {
                self.reached_target_at.get_or_insert(self.update);
                break;
            }
        }
        if let Some(w) = &mut self.metrics {
            w.flush()?;
        }
        if let Some(dir) = self.out_dir.clone() {
            self.save(dir.join("final.ckpt"))?;
        }
        Ok(TrainReport {
            updates: self.update as usize,
            env_steps: self.env_steps,
            final_rolling_success: self.rolling_success(),
            best_rolling_success: self.best_rolling,
            last_eval_success: self.last_eval,
            best_eval_success: self.best_eval,
            reached_target_at: self.reached_target_at,
            promotions: self
                .pool
                .as_ref()
                .map(|p| p.promotions().to_vec())
                .unwrap_or_default(),
            zero_sum_ticks: self.zero_sum_ticks,
            zero_sum_violations: self.zero_sum_violations,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    pub num_envs: usize,
    pub seed: u64,
    /// Act with the mean instead of sampling.
    pub deterministic: bool,
    pub sensor: SensorConfig,
    pub filter: FilterParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 1000,
            num_envs: 100,
            seed: 1_000_003,
            deterministic: true,
            sensor: SensorConfig::default(),
            filter: FilterParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub failure_rate: f64,
    pub draw_rate: f64,
    pub mean_return: f64,
    pub mean_length: f64,
}

/// Plays `episodes` episodes (an equal share per instance) and tallies
/// White's outcomes. Two-sided tasks need an `opponent` for Black.
pub fn evaluate(
    policy: &Policy,
    task: &TaskSpec,
    opponent: Option<&Policy>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if cfg.episodes == 0 || cfg.num_envs == 0 {
        return Err(Error::invalid("evaluation needs episodes and instances"));
    }
    if task.kind.is_two_sided() && opponent.is_none() {
        return Err(Error::invalid(format!(
            "{} needs an opponent policy",
            task.kind.name()
        )));
    }
    let n = cfg.num_envs.min(cfg.episodes);
    let quota: Vec<usize> = (0..n)
        .map(|i| cfg.episodes / n + usize::from(i < cfg.episodes % n))
        .collect();
    let mut done = vec![0usize; n];
    let mut batch = EnvBatch::with_sensor(
        task.clone(),
        TableConfig::default(),
        n,
        cfg.seed,
        cfg.sensor.clone(),
        cfg.filter,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xe7a1);
    let act = |p: &Policy, obs: &Array2<f64>, rng: &mut ChaCha8Rng| -> Result<Array2<f64>> {
        if cfg.deterministic {
            p.act(obs.view())
        } else {
            Ok(p.sample(obs.view(), rng)?
                .actions
                .mapv(|v| f64::from(v).clamp(-1.0, 1.0)))
        }
    };
    let (mut s, mut f, mut d, mut ret, mut len) = (0usize, 0usize, 0usize, 0.0, 0u64);
    let [mut obs_w, mut obs_b] = batch.observations();
    while done.iter().zip(&quota).any(|(a, b)| a < b) {
        let white = act(policy, &obs_w, &mut rng)?;
        let black = match opponent {
            Some(o) if task.kind.is_two_sided() => Some(act(o, &obs_b, &mut rng)?),
            _ => None,
        };
        let out = batch.step(white.view(), black.as_ref().map(|b| b.view()))?;
        for (i, info) in out.infos.iter().enumerate() {
            let Some(info) = info else { continue };
            if done[i] >= quota[i] {
                continue;
            }
            done[i] += 1;
            match info.outcome {
                Outcome::Success => s += 1,
                Outcome::Failure => f += 1,
                Outcome::Draw => d += 1,
            }
            ret += info.returns[0];
            len += u64::from(info.length);
        }
        [obs_w, obs_b] = out.obs;
    }
    let total = cfg.episodes as f64;
    Ok(EvalReport {
        task: task.kind.name().to_string(),
        episodes: cfg.episodes,
        success_rate: s as f64 / total,
        failure_rate: f as f64 / total,
        draw_rate: d as f64 / total,
        mean_return: ret / total,
        mean_length: len as f64 / total,
    })
}
