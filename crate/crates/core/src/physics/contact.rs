//! Figurine feet as rotation-dependent contact discs and ball impulses.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ball::{collide_walls, BallState, BallStatus, Vec2};
use super::config::{RodConfig, TableConfig, Team};
use super::motor::JointState;
use crate::error::{Error, Result};

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

/// Top-down footprint of one figurine foot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactDisc {
    pub rod: usize,
    pub figurine: usize,
    pub center: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    /// The foot is low enough to touch the ball.
    pub active: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub rod: usize,
    pub figurine: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    /// Team the goal was scored against.
    pub goal: Option<Team>,
    pub ball_out: bool,
    pub contacts: Vec<Contact>,
}

impl StepEvents {
    pub fn merge(&mut self, other: StepEvents) {
        if self.goal.is_none() {
            self.goal = other.goal;
        }
        self.ball_out |= other.ball_out;
        self.contacts.extend(other.contacts);
    }

    pub fn is_terminal(&self) -> bool {
        self.goal.is_some() || self.ball_out
    }
}

pub fn foot_pose(
    rod: &RodConfig,
    rod_index: usize,
    prismatic: &JointState,
    revolute: &JointState,
    figurine_index: usize,
) -> Result<ContactDisc> {
    if figurine_index >= rod.figurine_count {
        return Err(Error::invalid(format!(
            "figurine {figurine_index} out of range for rod with {} figurines",
            rod.figurine_count
        )));
    }
    let theta = revolute.position;
    let (sin, cos) = theta.sin_cos();
    Ok(ContactDisc {
        rod: rod_index,
        figurine: figurine_index,
        center: Vec2::new(
            rod.x_position + rod.foot_length * sin,
            rod.figurine_base_y(figurine_index) + prismatic.position,
        ),
        velocity: Vec2::new(
            rod.foot_length * cos * revolute.velocity,
            prismatic.velocity,
        ),
        radius: rod.foot_radius,
        active: wrap_angle(theta).abs() <= rod.contact_angle_window,
    })
}

/// Earliest fraction `t` in `[0, 1]` at which the segment `start -> end`
/// enters the circle of `radius` around the origin. `start` lies outside.
fn time_of_impact(start: Vec2, end: Vec2, radius: f64) -> Option<f64> {
    let d = end - start;
    let a = d.norm_sq();
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * start.dot(d);
    let c = start.norm_sq() - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    (0.0..=1.0).contains(&t).then_some(t)
}

/// Applies a single disc contact to the ball, returning true on contact.
///
/// The disc is treated as infinitely massive. Relative motion over the last
/// substep is swept so fast balls cannot tunnel through a foot.
fn collide_disc(
    ball: &mut BallState,
    disc: &ContactDisc,
    restitution: f64,
    ball_radius: f64,
    dt: f64,
) -> bool {
    let reach = ball_radius + disc.radius;
    let r2 = reach * reach;
    let rel_end = ball.position - disc.center;
    let rel_vel = ball.velocity - disc.velocity;
    let rel_start = rel_end - rel_vel * dt;
    // tolerance keeps a ball resting on the contact circle from re-triggering
    let end_inside = rel_end.norm_sq() < r2 * (1.0 - 1e-9);
    let mut offset = if rel_start.norm_sq() > r2 {
        match time_of_impact(rel_start, rel_end, reach) {
            Some(t) => rel_start + (rel_end - rel_start) * t,
            None => return false,
        }
    } else if end_inside {
        rel_end
    } else {
        return false;
    };
    if offset.norm_sq() == 0.0 {
        offset = if rel_vel.norm_sq() > 0.0 {
            -rel_vel
        } else {
            Vec2::new(1.0, 0.0)
        };
    }
    let normal = offset * (1.0 / offset.norm());
    let vn = rel_vel.dot(normal);
    if vn < 0.0 {
        ball.velocity = ball.velocity - normal * ((1.0 + restitution) * vn);
    }
    // positional projection onto the contact circle
    ball.position = disc.center + normal * reach;
    true
}

/// Resolves wall then disc contacts for one substep, in rod index order.
///
/// `ball` is the state after the free-flight position update of this
/// substep; `discs` holds the feet of present rods (inactive ones are
/// skipped).
pub fn resolve_collisions(
    ball: &BallState,
    discs: &[ContactDisc],
    cfg: &TableConfig,
) -> Result<(BallState, StepEvents)> {
    if !ball.is_finite() {
        return Err(Error::NonFinite(format!("ball state {ball:?}")));
    }
    let mut next = *ball;
    let mut events = StepEvents::default();
    if !next.in_play() {
        return Ok((next, events));
    }
    collide_walls(&mut next, cfg);
    if let BallStatus::InGoal(team) = next.status {
        events.goal = Some(team);
        return Ok((next, events));
    }
    for disc in discs.iter().filter(|d| d.active) {
        if collide_disc(
            &mut next,
            disc,
            cfg.disc_restitution,
            cfg.ball_radius,
            cfg.physics_dt,
        ) {
            events.contacts.push(Contact {
                rod: disc.rod,
                figurine: disc.figurine,
            });
            if next.speed() > cfg.launch_speed_threshold {
                next.status = BallStatus::OutOfTable;
                events.ball_out = true;
                break;
            }
        }
    }
    if !next.is_finite() {
        return Err(Error::NonFinite(format!(
            "ball state after collisions {next:?}"
        )));
    }
    Ok((next, events))
}
