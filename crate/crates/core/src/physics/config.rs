//! Table geometry, rod layout and physical constants.
//!
//! All quantities are SI. The world frame has its origin at the table centre,
//! `x` along the field length and `y` across it. White defends the goal at
//! `-x`, Black the goal at `+x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;
pub const NUM_RODS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    White,
    Black,
}

impl Team {
    pub fn opponent(self) -> Team {
        match self {
            Team::White => Team::Black,
            Team::Black => Team::White,
        }
    }

    /// Sign of the x coordinate of the goal this team defends.
    pub fn own_goal_sign(self) -> f64 {
        match self {
            Team::White => -1.0,
            Team::Black => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Team::White => 0,
            Team::Black => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RodRole {
    Keeper,
    Defense,
    Midfield,
    Offense,
}

impl RodRole {
    pub const ALL: [RodRole; 4] = [
        RodRole::Keeper,
        RodRole::Defense,
        RodRole::Midfield,
        RodRole::Offense,
    ];
}

/// Kinematic limits of a single joint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
    pub v_max: f64,
    pub a_max: f64,
}

impl JointLimits {
    pub fn mid(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.max - self.min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodConfig {
    pub team: Team,
    pub role: RodRole,
    pub x_position: f64,
    pub figurine_count: usize,
    pub figurine_spacing: f64,
    pub prismatic_range: [f64; 2],
    pub revolute_range: [f64; 2],
    pub prismatic_v_max: f64,
    pub prismatic_a_max: f64,
    pub revolute_v_max: f64,
    pub revolute_a_max: f64,
    pub foot_length: f64,
    pub foot_radius: f64,
    pub contact_angle_window: f64,
}

impl RodConfig {
    fn standard(team: Team, role: RodRole) -> Self {
        // Black's rods sit at the positive coordinate; White's are the point reflection.
        let (black_x, count, spacing, travel) = match role {
            RodRole::Keeper => (0.525, 1, 0.0, 0.11),
            RodRole::Defense => (0.375, 2, 0.24, 0.09),
            RodRole::Midfield => (0.075, 5, 0.12, 0.055),
            RodRole::Offense => (-0.225, 3, 0.185, 0.06),
        };
        let x_position = match team {
            Team::Black => black_x,
            Team::White => -black_x,
        };
        RodConfig {
            team,
            role,
            x_position,
            figurine_count: count,
            figurine_spacing: spacing,
            prismatic_range: [-travel, travel],
            revolute_range: [-4.0 * PI, 4.0 * PI],
            prismatic_v_max: 2.0,
            prismatic_a_max: 50.0,
            revolute_v_max: 100.0,
            revolute_a_max: 4000.0,
            foot_length: 0.04,
            foot_radius: 0.012,
            contact_angle_window: 50f64.to_radians(),
        }
    }

    pub fn prismatic_limits(&self) -> JointLimits {
        JointLimits {
            min: self.prismatic_range[0],
            max: self.prismatic_range[1],
            v_max: self.prismatic_v_max,
            a_max: self.prismatic_a_max,
        }
    }

    pub fn revolute_limits(&self) -> JointLimits {
        JointLimits {
            min: self.revolute_range[0],
            max: self.revolute_range[1],
            v_max: self.revolute_v_max,
            a_max: self.revolute_a_max,
        }
    }

    /// Lateral offset of figurine `index` with the carriage centred.
    pub fn figurine_base_y(&self, index: usize) -> f64 {
        (index as f64 - 0.5 * (self.figurine_count as f64 - 1.0)) * self.figurine_spacing
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub config_version: u32,
    pub field_length: f64,
    pub field_width: f64,
    pub goal_width: f64,
    pub ball_radius: f64,
    pub ball_mass: f64,
    pub wall_restitution: f64,
    pub wall_tangential_factor: f64,
    pub disc_restitution: f64,
    pub rolling_decel: f64,
    pub launch_speed_threshold: f64,
    /// Physics substep length in seconds.
    pub physics_dt: f64,
    pub rods: Vec<RodConfig>,
}

impl Default for TableConfig {
    fn default() -> Self {
        let order = [
            (Team::White, RodRole::Keeper),
            (Team::White, RodRole::Defense),
            (Team::Black, RodRole::Offense),
            (Team::White, RodRole::Midfield),
            (Team::Black, RodRole::Midfield),
            (Team::White, RodRole::Offense),
            (Team::Black, RodRole::Defense),
            (Team::Black, RodRole::Keeper),
        ];
        TableConfig {
            config_version: CONFIG_VERSION,
            field_length: 1.2,
            field_width: 0.68,
            goal_width: 0.205,
            ball_radius: 0.01725,
            ball_mass: 0.024,
            wall_restitution: 0.7,
            wall_tangential_factor: 0.9,
            disc_restitution: 0.85,
            rolling_decel: 0.3,
            launch_speed_threshold: 12.0,
            physics_dt: 1.0 / 240.0,
            rods: order
                .iter()
                .map(|&(t, r)| RodConfig::standard(t, r))
                .collect(),
        }
    }
}

impl TableConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TableConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::Incompatible(format!(
                "table config version {} (expected {CONFIG_VERSION})",
                self.config_version
            )));
        }
        let positive = [
            ("field_length", self.field_length),
            ("field_width", self.field_width),
            ("goal_width", self.goal_width),
            ("ball_radius", self.ball_radius),
            ("ball_mass", self.ball_mass),
            ("physics_dt", self.physics_dt),
            ("launch_speed_threshold", self.launch_speed_threshold),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.goal_width >= self.field_width {
            return Err(Error::invalid(
                "goal_width must be smaller than field_width",
            ));
        }
        for (name, e) in [
            ("wall_restitution", self.wall_restitution),
            ("disc_restitution", self.disc_restitution),
        ] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::invalid(format!(
                    "{name} must lie in (0, 1], got {e}"
                )));
            }
        }
        if !(self.wall_tangential_factor >= 0.0 && self.wall_tangential_factor <= 1.0) {
            return Err(Error::invalid("wall_tangential_factor must lie in [0, 1]"));
        }
        if !(self.rolling_decel >= 0.0) {
            return Err(Error::invalid("rolling_decel must be non-negative"));
        }
        if self.rods.len() != NUM_RODS {
            return Err(Error::invalid(format!(
                "expected {NUM_RODS} rods, got {}",
                self.rods.len()
            )));
        }
        if self
            .rods
            .windows(2)
            .any(|w| w[0].x_position >= w[1].x_position)
        {
            return Err(Error::invalid(
                "rods must be sorted by strictly increasing x",
            ));
        }
        for team in [Team::White, Team::Black] {
            let mut counts: Vec<usize> = self
                .rods
                .iter()
                .filter(|r| r.team == team)
                .map(|r| r.figurine_count)
                .collect();
            counts.sort_unstable();
            if counts != [1, 2, 3, 5] {
                return Err(Error::invalid(format!(
                    "{team:?} figurine counts must be {{1,2,5,3}}"
                )));
            }
        }
        for (i, rod) in self.rods.iter().enumerate() {
            let [pmin, pmax] = rod.prismatic_range;
            let travel = pmax - pmin;
            if !(pmin < pmax) {
                return Err(Error::invalid(format!("rod {i}: empty prismatic range")));
            }
            let span = rod.figurine_spacing * (rod.figurine_count as f64 - 1.0) + travel;
            if span > self.field_width {
                return Err(Error::invalid(format!(
                    "rod {i}: figurines plus travel exceed field width"
                )));
            }
            let [rmin, rmax] = rod.revolute_range;
            if !(rmin < rmax) {
                return Err(Error::invalid(format!("rod {i}: empty revolute range")));
            }
            for v in [
                rod.prismatic_v_max,
                rod.prismatic_a_max,
                rod.revolute_v_max,
                rod.revolute_a_max,
                rod.foot_length,
                rod.foot_radius,
                rod.contact_angle_window,
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(format!("rod {i}: limits must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.field_length
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.field_width
    }

    /// Index of the rod with the given team and role.
    pub fn rod_index(&self, team: Team, role: RodRole) -> usize {
        self.rods
            .iter()
            .position(|r| r.team == team && r.role == role)
            .expect("validated config holds every team/role pair")
    }

    /// Rod indices of a team ordered keeper, defense, midfield, offense.
    pub fn team_rods(&self, team: Team) -> [usize; 4] {
        RodRole::ALL.map(|role| self.rod_index(team, role))
    }

    /// Centre of the goal mouth this team defends.
    pub fn goal_center(&self, defending: Team) -> [f64; 2] {
        [defending.own_goal_sign() * self.half_length(), 0.0]
    }
}
