use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::obs::build_observation;
use super::reward::compute_reward;
use super::task::{JointKind, TaskKind, TaskSpec};
use crate::error::{Error, Result};
use crate::estimator::{BallTracker, CameraModel, FilterParams, SensorConfig};
use crate::physics::{
    step_world, BallState, JointLimits, RodRole, RodTargets, StepEvents, TableConfig, Team, Vec2,
    WorldState, DEFAULT_SUBSTEPS, NUM_RODS,
};

/// Episode result from the protagonist's (White's) point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    Draw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub outcome: Outcome,
    pub length: u32,
    /// Undiscounted returns indexed by [`Team::index`].
    pub returns: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    /// Observations indexed by [`Team::index`]; Black's is empty in
    /// one-sided tasks.
    pub obs: [Vec<f64>; 2],
    pub reward: [f64; 2],
    pub done: bool,
    pub events: StepEvents,
    pub info: Option<EpisodeInfo>,
}

/// Maps an action in `[-1, 1]` onto a joint setpoint; values outside the
/// interval are clamped.
pub fn scale_action(a: f64, limits: &JointLimits) -> f64 {
    limits.mid() + a.clamp(-1.0, 1.0) * limits.half_width()
}

/// Whether some figurine on a present rod can still reach a resting ball.
pub fn ball_reachable(world: &WorldState, table: &TableConfig) -> bool {
    let p = world.ball.position;
    world.present.iter().any(|i| {
        let rod = &table.rods[i];
        let reach = rod.foot_radius + table.ball_radius;
        if (p.x - rod.x_position).abs() > rod.foot_length + reach {
            return false;
        }
        (0..rod.figurine_count).any(|f| {
            let y = rod.figurine_base_y(f);
            p.y >= y + rod.prismatic_range[0] - reach && p.y <= y + rod.prismatic_range[1] + reach
        })
    })
}

/// Distance band in front of a keeper rod where a resting ball is spawned.
pub const KICK_BAND: [f64; 2] = [0.032, 0.058];

/// One task instance: owns the world, the episode bookkeeping and, for
/// filtered observations, a ball tracker.
#[derive(Clone, Debug)]
pub struct FoosballEnv {
    spec: Arc<TaskSpec>,
    table: Arc<TableConfig>,
    world: WorldState,
    rng: ChaCha8Rng,
    steps: u32,
    done: bool,
    touched: [bool; 2],
    returns: [f64; 2],
    tracker: Option<BallTracker>,
    filtered_ball: Option<BallState>,
}

impl FoosballEnv {
    pub fn new(spec: Arc<TaskSpec>, table: Arc<TableConfig>) -> Result<Self> {
        Self::with_sensor(
            spec,
            table,
            SensorConfig::default(),
            FilterParams::default(),
        )
    }

    pub fn with_sensor(
        spec: Arc<TaskSpec>,
        table: Arc<TableConfig>,
        sensor: SensorConfig,
        params: FilterParams,
    ) -> Result<Self> {
        spec.validate()?;
        table.validate()?;
        let tracker = if spec.obs_flags.use_filtered_ball {
            Some(BallTracker::new(sensor, CameraModel::default(), params)?)
        } else {
            None
        };
        let world = WorldState::centered(spec.present_rods(&table));
        Ok(FoosballEnv {
            spec,
            table,
            world,
            rng: ChaCha8Rng::seed_from_u64(0),
            steps: 0,
            done: true,
            touched: [false; 2],
            returns: [0.0; 2],
            tracker,
            filtered_ball: None,
        })
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn table(&self) -> &TableConfig {
        &self.table
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Latest latency-compensated ball estimate, if filtering is enabled.
    pub fn filtered_ball(&self) -> Option<&BallState> {
        self.filtered_ball.as_ref()
    }

    /// Starts a new episode drawn from the task's reset distribution.
    pub fn reset(&mut self, seed: u64) -> Result<[Vec<f64>; 2]> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let world = self.sample_initial_world();
        self.start(world)
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, world: WorldState, seed: u64) -> Result<[Vec<f64>; 2]> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.start(world)
    }

    fn start(&mut self, world: WorldState) -> Result<[Vec<f64>; 2]> {
        if !world.ball.is_finite() {
            return Err(Error::NonFinite("initial ball state".into()));
        }
        self.world = world;
        self.steps = 0;
        self.done = false;
        self.touched = [false; 2];
        self.returns = [0.0; 2];
        if let Some(tracker) = &mut self.tracker {
            tracker.reset();
            self.filtered_ball = Some(
                tracker
                    .observe(&self.world, &self.table, &mut self.rng)?
                    .unwrap_or_default(),
            );
        }
        self.observations()
    }

    fn sample_initial_world(&mut self) -> WorldState {
        let table = &self.table;
        let spec = &self.spec;
        let mut w = WorldState::centered(spec.present_rods(table));
        let r = table.ball_radius;
        let rng = &mut self.rng;
        let resting_in_front = |rng: &mut ChaCha8Rng, keeper: Team| {
            let rod = &table.rods[table.rod_index(keeper, RodRole::Keeper)];
            let forward = -keeper.own_goal_sign();
            let x = rod.x_position + forward * rng.random_range(KICK_BAND[0]..KICK_BAND[1]);
            let y = rng.random_range(rod.prismatic_range[0]..rod.prismatic_range[1]);
            BallState::new(Vec2::new(x, y), Vec2::ZERO)
        };
        w.ball = match spec.kind {
            TaskKind::Blocking | TaskKind::ScoringIncoming => {
                let start = Vec2::new(
                    rng.random_range(0.0..table.half_length() - r),
                    rng.random_range(-table.half_width() + r..table.half_width() - r),
                );
                let half_mouth = 0.5 * table.goal_width - r;
                let aim = Vec2::new(
                    -table.half_length(),
                    rng.random_range(-half_mouth..half_mouth),
                );
                let [lo, hi] = spec.ball_speed_range;
                let speed = if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                };
                let dir = aim - start;
                BallState::new(start, dir * (speed / dir.norm()))
            }
            TaskKind::ScoringResting | TaskKind::ScoringObstacles => {
                resting_in_front(rng, Team::White)
            }
            TaskKind::KeeperVsKeeper => {
                let side = if rng.random::<bool>() {
                    Team::White
                } else {
                    Team::Black
                };
                resting_in_front(rng, side)
            }
            TaskKind::FullGame => {
                // the strip right on the centre line is out of reach of both midfields
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let x = side * rng.random_range(0.01..0.03);
                BallState::new(Vec2::new(x, rng.random_range(-0.25..0.25)), Vec2::ZERO)
            }
        };
        for &role in &spec.obstacle_rods {
            let i = table.rod_index(Team::Black, role);
            let [lo, hi] = table.rods[i].prismatic_range;
            let p = rng.random_range(lo..hi);
            w.rods[i].prismatic = crate::physics::JointState::at_rest(p);
        }
        w
    }

    fn observations(&self) -> Result<[Vec<f64>; 2]> {
        let fb = self.filtered_ball.as_ref();
        let white = build_observation(&self.world, Team::White, &self.spec, &self.table, fb)?;
        let black = if self.spec.kind.is_two_sided() {
            build_observation(&self.world, Team::Black, &self.spec, &self.table, fb)?
        } else {
            Vec::new()
        };
        Ok([white, black])
    }

    /// World setpoints for the given own-frame actions; uncontrolled joints
    /// hold their current setpoints.
    pub fn targets_for(&self, white: &[f64], black: &[f64]) -> Result<[RodTargets; NUM_RODS]> {
        let mut targets = self.world.targets();
        for (side, actions) in [(Team::White, white), (Team::Black, black)] {
            let joints = self.spec.joints(side);
            if actions.len() != joints.len() {
                return Err(Error::contract(format!(
                    "{side:?} action has {} entries, expected {}",
                    actions.len(),
                    joints.len()
                )));
            }
            let sign = super::obs::side_sign(side);
            for (j, &a) in joints.iter().zip(actions) {
                if !a.is_finite() {
                    return Err(Error::invalid(format!("non-finite action {a}")));
                }
                let i = self.table.rod_index(side, j.role);
                let rod = &self.table.rods[i];
                // own-frame limits are the world limits seen through the side's sign
                let world_limits = match j.joint {
                    JointKind::Prismatic => rod.prismatic_limits(),
                    JointKind::Revolute => rod.revolute_limits(),
                };
                let own = if sign > 0.0 {
                    world_limits
                } else {
                    JointLimits {
                        min: -world_limits.max,
                        max: -world_limits.min,
                        ..world_limits
                    }
                };
                let target = sign * scale_action(a, &own);
                match j.joint {
                    JointKind::Prismatic => targets[i].prismatic = target,
                    JointKind::Revolute => targets[i].revolute = target,
                }
            }
        }
        Ok(targets)
    }

    /// Advances one control step. `black` must be given exactly for
    /// two-sided tasks.
    pub fn step(&mut self, white: &[f64], black: Option<&[f64]>) -> Result<StepOutput> {
        if self.done {
            return Err(Error::contract("step called on a finished episode"));
        }
        let black = match (self.spec.kind.is_two_sided(), black) {
            (true, Some(b)) => b,
            (false, None) => &[][..],
            (true, None) => return Err(Error::contract("two-sided task needs a black action")),
            (false, Some(_)) => {
                return Err(Error::contract("one-sided task takes no black action"))
            }
        };
        let targets = self.targets_for(white, black)?;
        let (next, events) = step_world(&self.world, &targets, &self.table, DEFAULT_SUBSTEPS)?;
        let prev = std::mem::replace(&mut self.world, next);
        self.steps += 1;
        for c in &events.contacts {
            self.touched[self.table.rods[c.rod].team.index()] = true;
        }
        if let Some(tracker) = &mut self.tracker {
            self.filtered_ball = Some(
                tracker
                    .observe(&self.world, &self.table, &mut self.rng)?
                    .unwrap_or_default(),
            );
        }

        let white_r = compute_reward(
            &prev,
            &self.world,
            &events,
            white,
            Team::White,
            &self.spec,
            &self.table,
        );
        let black_r = if self.spec.kind.is_two_sided() {
            compute_reward(
                &prev,
                &self.world,
                &events,
                black,
                Team::Black,
                &self.spec,
                &self.table,
            )
        } else {
            0.0
        };
        let reward = [white_r, black_r];
        self.returns[0] += white_r;
        self.returns[1] += black_r;

        let outcome = self.outcome(&events);
        self.done = outcome.is_some();
        let info = outcome.map(|outcome| EpisodeInfo {
            outcome,
            length: self.steps,
            returns: self.returns,
        });
        Ok(StepOutput {
            obs: self.observations()?,
            reward,
            done: self.done,
            events,
            info,
        })
    }

    fn outcome(&self, events: &StepEvents) -> Option<Outcome> {
        let two_sided = self.spec.kind.is_two_sided();
        let ball = &self.world.ball;
        if let Some(conceding) = events.goal {
            return Some(if conceding == Team::Black {
                Outcome::Success
            } else {
                Outcome::Failure
            });
        }
        if events.ball_out {
            return Some(if two_sided {
                Outcome::Draw
            } else {
                Outcome::Failure
            });
        }
        let at_rest = ball.velocity == Vec2::ZERO;
        if self.spec.kind == TaskKind::Blocking {
            let cleared = self.touched[0] && ball.position.x > 0.0 && ball.velocity.x > 0.0;
            if cleared || at_rest {
                return Some(Outcome::Success);
            }
            if self.steps >= self.spec.episode_cap {
                return Some(if self.touched[0] {
                    Outcome::Success
                } else {
                    Outcome::Failure
                });
            }
            return None;
        }
        let dead = at_rest && !ball_reachable(&self.world, &self.table);
        if dead || self.steps >= self.spec.episode_cap {
            return Some(if two_sided {
                Outcome::Draw
            } else {
                Outcome::Failure
            });
        }
        None
    }
}
