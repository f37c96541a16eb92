//! Declarative task definitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{RodRole, TableConfig, Team};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Blocking,
    ScoringResting,
    ScoringIncoming,
    ScoringObstacles,
    KeeperVsKeeper,
    FullGame,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Blocking,
        TaskKind::ScoringResting,
        TaskKind::ScoringIncoming,
        TaskKind::ScoringObstacles,
        TaskKind::KeeperVsKeeper,
        TaskKind::FullGame,
    ];

    pub fn is_two_sided(self) -> bool {
        matches!(self, TaskKind::KeeperVsKeeper | TaskKind::FullGame)
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Blocking => "blocking",
            TaskKind::ScoringResting => "scoring_resting",
            TaskKind::ScoringIncoming => "scoring_incoming",
            TaskKind::ScoringObstacles => "scoring_obstacles",
            TaskKind::KeeperVsKeeper => "keeper_vs_keeper",
            TaskKind::FullGame => "full_game",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown task {name:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Prismatic,
    Revolute,
}

/// One joint of a side's rod, addressed by role so the same reference works
/// for both teams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointRef {
    pub role: RodRole,
    pub joint: JointKind,
}

impl JointRef {
    pub const fn new(role: RodRole, joint: JointKind) -> Self {
        JointRef { role, joint }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsFlags {
    pub include_own_pos: bool,
    pub include_own_vel: bool,
    /// Opponent rods are observed through their prismatic joints only.
    pub opponent_prismatic_only: bool,
    /// Ball entries come from the latency-compensated estimator.
    pub use_filtered_ball: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardCoeffs {
    pub goal_reward: f64,
    pub out_penalty: f64,
    pub c_goal_distance: f64,
    pub c_figurine_ball: f64,
    pub c_action_reg: f64,
}

impl Default for RewardCoeffs {
    fn default() -> Self {
        RewardCoeffs {
            goal_reward: 1000.0,
            out_penalty: -500.0,
            c_goal_distance: 10.0,
            c_figurine_ball: 5.0,
            c_action_reg: 0.01,
        }
    }
}

impl RewardCoeffs {
    pub fn zero() -> Self {
        RewardCoeffs {
            goal_reward: 0.0,
            out_penalty: 0.0,
            c_goal_distance: 0.0,
            c_figurine_ball: 0.0,
            c_action_reg: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Joints driven by the White (protagonist) policy, in action order.
    pub white_joints: Vec<JointRef>,
    /// Joints driven by the Black policy; empty for one-sided tasks.
    pub black_joints: Vec<JointRef>,
    /// Static opponent rods with randomized carriage offsets.
    pub obstacle_rods: Vec<RodRole>,
    pub obs_flags: ObsFlags,
    pub reward_coeffs: RewardCoeffs,
    /// Episode length limit in control steps.
    pub episode_cap: u32,
    pub ball_speed_range: [f64; 2],
}

const KEEPER_P: JointRef = JointRef::new(RodRole::Keeper, JointKind::Prismatic);
const KEEPER_R: JointRef = JointRef::new(RodRole::Keeper, JointKind::Revolute);

/// Control steps per second.
pub const CONTROL_HZ: f64 = 60.0;

fn all_joints() -> Vec<JointRef> {
    RodRole::ALL
        .iter()
        .flat_map(|&role| {
            [
                JointRef::new(role, JointKind::Prismatic),
                JointRef::new(role, JointKind::Revolute),
            ]
        })
        .collect()
}

impl TaskSpec {
    pub fn preset(kind: TaskKind) -> Self {
        let base_cap = (10.0 * CONTROL_HZ) as u32;
        let long_cap = (30.0 * CONTROL_HZ) as u32;
        let flags = |pos, vel, prismatic_only| ObsFlags {
            include_own_pos: pos,
            include_own_vel: vel,
            opponent_prismatic_only: prismatic_only,
            use_filtered_ball: false,
        };
        let (white, black, obstacles, obs_flags, cap) = match kind {
            TaskKind::Blocking => (
                vec![KEEPER_P],
                vec![],
                vec![],
                flags(true, false, true),
                base_cap,
            ),
            TaskKind::ScoringResting | TaskKind::ScoringIncoming => (
                vec![KEEPER_P, KEEPER_R],
                vec![],
                vec![],
                flags(true, false, true),
                base_cap,
            ),
            TaskKind::ScoringObstacles => (
                vec![KEEPER_P, KEEPER_R],
                vec![],
                vec![RodRole::Keeper, RodRole::Defense, RodRole::Offense],
                flags(true, false, true),
                base_cap,
            ),
            TaskKind::KeeperVsKeeper => (
                vec![KEEPER_P, KEEPER_R],
                vec![KEEPER_P, KEEPER_R],
                vec![],
                flags(true, true, true),
                long_cap,
            ),
            TaskKind::FullGame => (
                all_joints(),
                all_joints(),
                vec![],
                flags(true, true, false),
                long_cap,
            ),
        };
        TaskSpec {
            kind,
            white_joints: white,
            black_joints: black,
            obstacle_rods: obstacles,
            obs_flags,
            reward_coeffs: RewardCoeffs::default(),
            episode_cap: cap,
            ball_speed_range: [2.0, 7.0],
        }
    }

    pub fn with_filtered_ball(mut self, on: bool) -> Self {
        self.obs_flags.use_filtered_ball = on;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TaskSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.white_joints.is_empty() {
            return Err(Error::invalid("protagonist controls no joints"));
        }
        if self.kind.is_two_sided() == self.black_joints.is_empty() {
            return Err(Error::invalid(
                "black joints must be set exactly for two-sided tasks",
            ));
        }
        for joints in [&self.white_joints, &self.black_joints] {
            for (i, j) in joints.iter().enumerate() {
                if joints[..i].contains(j) {
                    return Err(Error::invalid(format!("joint {j:?} listed twice")));
                }
            }
        }
        let black_roles: Vec<RodRole> = self.black_joints.iter().map(|j| j.role).collect();
        if self.obstacle_rods.iter().any(|r| black_roles.contains(r)) {
            return Err(Error::invalid("obstacle rods overlap controlled rods"));
        }
        if !self.obs_flags.include_own_pos
            && !self.obs_flags.include_own_vel
            && self.kind.is_two_sided()
        {
            return Err(Error::invalid("two-sided tasks observe own joints"));
        }
        let [lo, hi] = self.ball_speed_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid(
                "ball_speed_range must be a non-negative interval",
            ));
        }
        let c = &self.reward_coeffs;
        if [c.c_goal_distance, c.c_figurine_ball, c.c_action_reg]
            .iter()
            .any(|&v| !(v >= 0.0))
            || c.goal_reward < 0.0
        {
            return Err(Error::invalid("reward coefficients must be non-negative"));
        }
        if self.episode_cap == 0 {
            return Err(Error::invalid("episode_cap must be positive"));
        }
        Ok(())
    }

    pub fn joints(&self, side: Team) -> &[JointRef] {
        match side {
            Team::White => &self.white_joints,
            Team::Black => &self.black_joints,
        }
    }

    pub fn action_dim(&self, side: Team) -> usize {
        self.joints(side).len()
    }

    /// Roles of own rods with at least one controlled joint, keeper first.
    pub fn own_roles(&self, side: Team) -> Vec<RodRole> {
        RodRole::ALL
            .into_iter()
            .filter(|r| self.joints(side).iter().any(|j| j.role == *r))
            .collect()
    }

    /// Opponent rods appearing in the observation, keeper first.
    pub fn opponent_roles(&self, side: Team) -> Vec<RodRole> {
        if self.kind.is_two_sided() {
            self.own_roles(side.opponent())
        } else {
            RodRole::ALL
                .into_iter()
                .filter(|r| self.obstacle_rods.contains(r))
                .collect()
        }
    }

    /// Joints in the opponent block, keeper first.
    pub fn opponent_joints(&self, side: Team) -> Vec<JointRef> {
        let kinds: &[JointKind] = if self.obs_flags.opponent_prismatic_only {
            &[JointKind::Prismatic]
        } else {
            &[JointKind::Prismatic, JointKind::Revolute]
        };
        self.opponent_roles(side)
            .into_iter()
            .flat_map(|role| kinds.iter().map(move |&joint| JointRef::new(role, joint)))
            .filter(|j| !self.kind.is_two_sided() || self.joints(side.opponent()).contains(j))
            .collect()
    }

    pub fn obs_dim(&self) -> usize {
        let own = self.white_joints.len();
        let opp = self.opponent_joints(Team::White).len();
        let per_joint =
            self.obs_flags.include_own_pos as usize + self.obs_flags.include_own_vel as usize;
        (own + opp) * per_joint + 4
    }

    /// Rods present on the table for this task.
    pub fn present_rods(&self, table: &TableConfig) -> crate::physics::RodMask {
        let mut idx: Vec<usize> = self
            .own_roles(Team::White)
            .iter()
            .map(|&r| table.rod_index(Team::White, r))
            .collect();
        if self.kind.is_two_sided() {
            idx.extend(
                self.own_roles(Team::Black)
                    .iter()
                    .map(|&r| table.rod_index(Team::Black, r)),
            );
        }
        idx.extend(
            self.obstacle_rods
                .iter()
                .map(|&r| table.rod_index(Team::Black, r)),
        );
        crate::physics::RodMask::from_indices(idx)
    }
}
