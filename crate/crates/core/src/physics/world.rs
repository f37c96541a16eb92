use serde::{Deserialize, Serialize};

use super::ball::{advance_free, BallState, Vec2};
use super::config::{TableConfig, NUM_RODS};
use super::contact::{foot_pose, resolve_collisions, ContactDisc, StepEvents};
use super::motor::{motor_track, JointState};
use crate::error::{Error, Result};

/// Control substeps per decision: 240 Hz physics under a 60 Hz policy.
pub const DEFAULT_SUBSTEPS: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RodState {
    pub prismatic: JointState,
    pub revolute: JointState,
}

/// Set of rods physically installed on the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RodMask(pub u8);

impl RodMask {
    pub const ALL: RodMask = RodMask(0xff);
    pub const NONE: RodMask = RodMask(0);

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        RodMask(indices.into_iter().fold(0u8, |m, i| m | (1 << i)))
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..NUM_RODS).filter(move |&i| self.contains(i))
    }

    /// Mask after a 180 degree rotation of the table (rod i <-> rod 7 - i).
    pub fn rotated(self) -> Self {
        RodMask(self.0.reverse_bits())
    }
}

impl Default for RodMask {
    fn default() -> Self {
        RodMask::ALL
    }
}

/// Position setpoints for one rod.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RodTargets {
    pub prismatic: f64,
    pub revolute: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub ball: BallState,
    pub rods: [RodState; NUM_RODS],
    pub present: RodMask,
}

impl WorldState {
    /// All joints centred and at rest, ball at rest at the table centre.
    pub fn centered(present: RodMask) -> Self {
        WorldState {
            tick: 0,
            ball: BallState::new(Vec2::ZERO, Vec2::ZERO),
            rods: [RodState::default(); NUM_RODS],
            present,
        }
    }

    pub fn targets(&self) -> [RodTargets; NUM_RODS] {
        self.rods.map(|r| RodTargets {
            prismatic: r.prismatic.target,
            revolute: r.revolute.target,
        })
    }

    /// Contact discs of every figurine on present rods, rod index order.
    pub fn discs(&self, cfg: &TableConfig) -> Vec<ContactDisc> {
        let mut out = Vec::with_capacity(22);
        self.discs_into(cfg, &mut out);
        out
    }

    fn discs_into(&self, cfg: &TableConfig, out: &mut Vec<ContactDisc>) {
        out.clear();
        for i in self.present.iter() {
            let rod = &cfg.rods[i];
            let state = &self.rods[i];
            for f in 0..rod.figurine_count {
                let disc = foot_pose(rod, i, &state.prismatic, &state.revolute, f)
                    .expect("index in range");
                out.push(disc);
            }
        }
    }

    /// Image of this state under the table's 180 degree rotation.
    pub fn rotated(&self) -> WorldState {
        let neg = |j: JointState| JointState {
            position: -j.position,
            velocity: -j.velocity,
            target: -j.target,
        };
        let mut rods = [RodState::default(); NUM_RODS];
        for (i, r) in self.rods.iter().enumerate() {
            rods[NUM_RODS - 1 - i] = RodState {
                prismatic: neg(r.prismatic),
                revolute: neg(r.revolute),
            };
        }
        let status = match self.ball.status {
            super::ball::BallStatus::InGoal(t) => super::ball::BallStatus::InGoal(t.opponent()),
            s => s,
        };
        WorldState {
            tick: self.tick,
            ball: BallState {
                position: -self.ball.position,
                velocity: -self.ball.velocity,
                status,
            },
            rods,
            present: self.present.rotated(),
        }
    }
}

/// Advances the world by `n_substeps` physics steps holding `targets`.
///
/// Every substep tracks all 16 joints, then moves the ball and resolves wall
/// and figurine contacts. Once the ball leaves play it stays frozen for the
/// rest of the call while the joints keep moving.
pub fn step_world(
    world: &WorldState,
    targets: &[RodTargets; NUM_RODS],
    cfg: &TableConfig,
    n_substeps: usize,
) -> Result<(WorldState, StepEvents)> {
    if n_substeps == 0 {
        return Err(Error::invalid("n_substeps must be at least 1"));
    }
    let dt = cfg.physics_dt;
    let mut next = world.clone();
    for (rod, t) in next.rods.iter_mut().zip(targets) {
        rod.prismatic.target = t.prismatic;
        rod.revolute.target = t.revolute;
    }
    let mut events = StepEvents::default();
    let mut discs = Vec::with_capacity(22);
    for _ in 0..n_substeps {
        for (rod, rc) in next.rods.iter_mut().zip(&cfg.rods) {
            rod.prismatic = motor_track(rod.prismatic, &rc.prismatic_limits(), dt)?;
            rod.revolute = motor_track(rod.revolute, &rc.revolute_limits(), dt)?;
        }
        if next.ball.in_play() {
            advance_free(&mut next.ball, cfg, dt, false);
            next.discs_into(cfg, &mut discs);
            let (ball, ev) = resolve_collisions(&next.ball, &discs, cfg)?;
            next.ball = ball;
            events.merge(ev);
        }
        next.tick += 1;
    }
    Ok((next, events))
}
