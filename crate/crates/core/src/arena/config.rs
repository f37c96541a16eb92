use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::env::{TaskKind, TaskSpec};
use crate::error::{Error, Result};
use crate::estimator::{FilterParams, SensorConfig};
use crate::physics::Team;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingMode {
    GroundTruth,
    /// Machine observations go through the detection + tracking pipeline.
    Filtered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub task: TaskKind,
    pub human_side: Team,
    /// Machine policy; `None` leaves the machine rods idle at centre.
    pub checkpoint: Option<PathBuf>,
    pub sensing: SensingMode,
    /// First side to reach this many goals wins; 0 disables the limit.
    pub score_limit: u32,
    /// Match length in seconds of game time; 0 disables the limit.
    pub time_limit_s: f64,
    /// Pause before the ball is re-spawned after a goal or a dead ball.
    pub kickoff_pause_s: f64,
    pub seed: u64,
    pub sensor: SensorConfig,
    pub filter: FilterParams,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            task: TaskKind::KeeperVsKeeper,
            human_side: Team::White,
            checkpoint: None,
            sensing: SensingMode::GroundTruth,
            score_limit: 5,
            time_limit_s: 300.0,
            kickoff_pause_s: 1.0,
            seed: 0,
            sensor: SensorConfig::default(),
            filter: FilterParams::default(),
        }
    }
}

impl MatchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: MatchConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.task.is_two_sided() {
            return Err(Error::invalid(format!(
                "matches need a two-sided task, got {}",
                self.task.name()
            )));
        }
        if !(self.time_limit_s.is_finite() && self.time_limit_s >= 0.0) {
            return Err(Error::invalid("time_limit_s must be a non-negative number"));
        }
        if !(self.kickoff_pause_s.is_finite() && self.kickoff_pause_s >= 0.0) {
            return Err(Error::invalid(
                "kickoff_pause_s must be a non-negative number",
            ));
        }
        self.sensor.validate()?;
        Ok(())
    }

    /// Task the machine policy observes.
    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec::preset(self.task).with_filtered_ball(self.sensing == SensingMode::Filtered)
    }

    pub fn machine_side(&self) -> Team {
        self.human_side.opponent()
    }
}
