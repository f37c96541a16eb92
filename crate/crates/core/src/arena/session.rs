//! Authoritative match state advanced one control tick at a time.

use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::MatchConfig;
use super::wire::{ActionMsg, MatchResult, Score, StateMsg, WireEvent, WireMessage};
use crate::env::{FoosballEnv, JointKind, TaskSpec, CONTROL_HZ};
use crate::error::{Error, Result};
use crate::physics::{TableConfig, Team, NUM_RODS};
use crate::ppo::{load_for_task, Policy};

/// One log line per control tick: the broadcast state plus the own-frame
/// action vectors applied by each side (absent while play is paused).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchLogRecord {
    pub state: StateMsg,
    pub white: Option<Vec<f64>>,
    pub black: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct TickOutput {
    pub state: StateMsg,
    pub record: MatchLogRecord,
    /// Set on the tick that ends the match.
    pub end: Option<WireMessage>,
}

pub struct Match {
    cfg: MatchConfig,
    spec: Arc<TaskSpec>,
    table: Arc<TableConfig>,
    env: FoosballEnv,
    machine: Option<Policy>,
    /// Latest human setpoints per rod in world-frame `[-1, 1]` units.
    commands: [[f64; 2]; NUM_RODS],
    obs: [Vec<f64>; 2],
    rng: ChaCha8Rng,
    tick: u64,
    score: Score,
    countdown: u32,
    result: Option<MatchResult>,
}

impl Match {
    /// Builds a match, loading the machine checkpoint named in the config.
    pub fn from_config(cfg: MatchConfig) -> Result<Self> {
        let machine = match &cfg.checkpoint {
            Some(path) => Some(load_for_task(path, &cfg.task_spec(), None)?.0),
            None => None,
        };
        Self::new(cfg, machine)
    }

    pub fn new(cfg: MatchConfig, machine: Option<Policy>) -> Result<Self> {
        cfg.validate()?;
        let spec = Arc::new(cfg.task_spec());
        let table = Arc::new(TableConfig::default());
        if let Some(p) = &machine {
            let side = cfg.machine_side();
            if p.obs_dim() != spec.obs_dim() || p.action_dim() != spec.action_dim(side) {
                return Err(Error::Incompatible(format!(
                    "policy maps {} -> {} but {} needs {} -> {}",
                    p.obs_dim(),
                    p.action_dim(),
                    spec.kind.name(),
                    spec.obs_dim(),
                    spec.action_dim(side)
                )));
            }
        }
        let mut env =
            FoosballEnv::with_sensor(spec.clone(), table.clone(), cfg.sensor.clone(), cfg.filter)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let obs = env.reset(rng.random())?;
        Ok(Match {
            cfg,
            spec,
            table,
            env,
            machine,
            commands: [[0.0; 2]; NUM_RODS],
            obs,
            rng,
            tick: 0,
            score: Score::default(),
            countdown: 0,
            result: None,
        })
    }

    pub fn config(&self) -> &MatchConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn table(&self) -> &TableConfig {
        &self.table
    }

    pub fn env(&self) -> &FoosballEnv {
        &self.env
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn score(&self) -> Score {
        self.score
    }

    pub fn result(&self) -> Option<MatchResult> {
        self.result
    }

    /// Own-frame observation `side` acts on next tick.
    pub fn observation(&self, side: Team) -> &[f64] {
        &self.obs[side.index()]
    }

    /// Rods a client on `side` may command: the side's rods active in the task.
    pub fn controllable(&self, side: Team) -> Vec<usize> {
        let mut rods: Vec<usize> = self
            .spec
            .own_roles(side)
            .into_iter()
            .map(|r| self.table.rod_index(side, r))
            .collect();
        rods.dedup();
        rods
    }

    /// Stores human setpoints. The whole message is rejected when any rod is
    /// not controllable by `side`; values are clamped to `[-1, 1]`.
    pub fn handle_action(&mut self, side: Team, msg: &ActionMsg) -> Result<()> {
        if side != self.cfg.human_side {
            return Err(Error::invalid(format!("{side:?} is played by the machine")));
        }
        let owned = self.controllable(side);
        for c in &msg.targets {
            if !owned.contains(&c.rod) {
                return Err(Error::invalid(format!(
                    "rod {} is not controlled by {side:?}",
                    c.rod
                )));
            }
            if !(c.prismatic.is_finite() && c.revolute.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite target for rod {}",
                    c.rod
                )));
            }
        }
        for c in &msg.targets {
            self.commands[c.rod] = [c.prismatic.clamp(-1.0, 1.0), c.revolute.clamp(-1.0, 1.0)];
        }
        Ok(())
    }

    /// Own-frame action vector for the human side.
    fn human_action(&self) -> Vec<f64> {
        let side = self.cfg.human_side;
        let sign = crate::env::obs::side_sign(side);
        self.spec
            .joints(side)
            .iter()
            .map(|j| {
                let cmd = self.commands[self.table.rod_index(side, j.role)];
                let v = match j.joint {
                    JointKind::Prismatic => cmd[0],
                    JointKind::Revolute => cmd[1],
                };
                sign * v
            })
            .collect()
    }

    fn machine_action(&self) -> Result<Vec<f64>> {
        let side = self.cfg.machine_side();
        match &self.machine {
            Some(p) => {
                let obs = &self.obs[side.index()];
                let x = Array2::from_shape_vec((1, obs.len()), obs.clone()).expect("row");
                Ok(p.act(x.view())?.row(0).to_vec())
            }
            None => Ok(vec![0.0; self.spec.action_dim(side)]),
        }
    }

    fn pause_ticks(&self) -> u32 {
        (self.cfg.kickoff_pause_s * CONTROL_HZ).round() as u32
    }

    fn respawn(&mut self) -> Result<()> {
        self.obs = self.env.reset(self.rng.random())?;
        Ok(())
    }

    /// Advances one control tick: plays a physics step (or one pause tick
    /// after a goal) and reports the state to broadcast.
    pub fn tick(&mut self) -> Result<TickOutput> {
        if self.result.is_some() {
            return Err(Error::contract("match already finished"));
        }
        let mut events = Vec::new();
        let mut applied = (None, None);
        if self.countdown > 0 {
            self.countdown -= 1;
            if self.countdown == 0 {
                self.respawn()?;
                events.push(WireEvent::Kickoff);
            }
        } else {
            let human = self.human_action();
            let machine = self.machine_action()?;
            let (white, black) = match self.cfg.human_side {
                Team::White => (human, machine),
                Team::Black => (machine, human),
            };
            let out = self.env.step(&white, Some(&black))?;
            self.obs = out.obs;
            events = WireEvent::from_step(&out.events);
            if let Some(against) = out.events.goal {
                match against {
                    Team::Black => self.score.white += 1,
                    Team::White => self.score.black += 1,
                }
            }
            if out.done {
                let pause = self.pause_ticks();
                if pause == 0 {
                    self.respawn()?;
                    events.push(WireEvent::Kickoff);
                } else {
                    self.countdown = pause;
                }
            }
            applied = (Some(white), Some(black));
        }
        self.tick += 1;
        let time_s = self.tick as f64 / CONTROL_HZ;
        let mut state =
            StateMsg::from_world(self.tick, time_s, self.env.world(), self.score, events);
        state.countdown = (self.countdown > 0).then_some(self.countdown);

        let limit = self.cfg.score_limit;
        let by_score = limit > 0 && (self.score.white >= limit || self.score.black >= limit);
        let by_time = self.cfg.time_limit_s > 0.0 && time_s >= self.cfg.time_limit_s - 1e-9;
        let end = if by_score || by_time {
            let result = self.standing();
            self.result = Some(result);
            Some(WireMessage::End {
                result,
                score: self.score,
            })
        } else {
            None
        };
        let record = MatchLogRecord {
            state: state.clone(),
            white: applied.0,
            black: applied.1,
        };
        Ok(TickOutput { state, record, end })
    }

    /// Result as the score stands.
    pub fn standing(&self) -> MatchResult {
        match self.score.white.cmp(&self.score.black) {
            std::cmp::Ordering::Greater => MatchResult::WhiteWins,
            std::cmp::Ordering::Less => MatchResult::BlackWins,
            std::cmp::Ordering::Equal => MatchResult::Draw,
        }
    }

    /// Ends the match early.
    pub fn abort(&mut self) -> WireMessage {
        self.result = Some(MatchResult::Aborted);
        WireMessage::End {
            result: MatchResult::Aborted,
            score: self.score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::wire::RodCommand;
    use crate::env::scale_action;

    fn cfg() -> MatchConfig {
        MatchConfig {
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn idle_match_runs() {
        let mut m = Match::new(cfg(), None).unwrap();
        for t in 1..=120 {
            let out = m.tick().unwrap();
            assert_eq!(out.state.tick, t);
            assert_eq!(out.state.rods.len(), NUM_RODS);
        }
    }

    #[test]
    fn prismatic_command_is_affine() {
        let mut m = Match::new(cfg(), None).unwrap();
        let msg = ActionMsg {
            client: None,
            targets: vec![RodCommand {
                rod: 0,
                prismatic: 0.5,
                revolute: 0.0,
            }],
        };
        m.handle_action(Team::White, &msg).unwrap();
        m.tick().unwrap();
        let limits = m.table().rods[0].prismatic_limits();
        assert_eq!(
            m.env().world().rods[0].prismatic.target,
            scale_action(0.5, &limits)
        );
        assert_eq!(
            m.env().world().rods[0].prismatic.target,
            limits.mid() + 0.5 * limits.half_width()
        );
    }

    #[test]
    fn opponent_rod_is_rejected() {
        let mut m = Match::new(cfg(), None).unwrap();
        let black_keeper = m
            .table()
            .rod_index(Team::Black, crate::physics::RodRole::Keeper);
        let msg = ActionMsg {
            client: None,
            targets: vec![RodCommand {
                rod: black_keeper,
                prismatic: 1.0,
                revolute: 0.0,
            }],
        };
        assert!(matches!(
            m.handle_action(Team::White, &msg),
            Err(Error::InvalidInput(_))
        ));
        assert!(m.handle_action(Team::Black, &msg).is_err());
    }

    #[test]
    fn last_writer_wins_and_clamps() {
        let mut m = Match::new(cfg(), None).unwrap();
        let a = ActionMsg {
            client: None,
            targets: vec![RodCommand {
                rod: 0,
                prismatic: -0.5,
                revolute: 0.0,
            }],
        };
        let b = ActionMsg {
            client: None,
            targets: vec![RodCommand {
                rod: 0,
                prismatic: 7.0,
                revolute: -9.0,
            }],
        };
        m.handle_action(Team::White, &a).unwrap();
        m.handle_action(Team::White, &b).unwrap();
        m.tick().unwrap();
        let rod = &m.table().rods[0];
        let w = &m.env().world().rods[0];
        assert_eq!(w.prismatic.target, rod.prismatic_limits().max);
        assert_eq!(w.revolute.target, rod.revolute_limits().min);
    }

    #[test]
    fn black_human_commands_are_world_frame() {
        let mut m = Match::new(
            MatchConfig {
                human_side: Team::Black,
                ..cfg()
            },
            None,
        )
        .unwrap();
        let k = m
            .table()
            .rod_index(Team::Black, crate::physics::RodRole::Keeper);
        let msg = ActionMsg {
            client: None,
            targets: vec![RodCommand {
                rod: k,
                prismatic: 0.5,
                revolute: 0.25,
            }],
        };
        m.handle_action(Team::Black, &msg).unwrap();
        m.tick().unwrap();
        let rod = &m.table().rods[k];
        let w = &m.env().world().rods[k];
        assert!((w.prismatic.target - scale_action(0.5, &rod.prismatic_limits())).abs() < 1e-15);
        assert!((w.revolute.target - scale_action(0.25, &rod.revolute_limits())).abs() < 1e-12);
    }

    #[test]
    fn mismatched_policy_is_refused() {
        let p = Policy::new(&crate::ppo::NetShape::new(5, &[8], 1), 0);
        assert!(matches!(
            Match::new(cfg(), Some(p)),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn one_sided_task_is_refused() {
        let c = MatchConfig {
            task: crate::env::TaskKind::Blocking,
            ..cfg()
        };
        assert!(Match::new(c, None).is_err());
    }
}
