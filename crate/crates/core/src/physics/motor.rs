//! Position-controlled joint drive with a trapezoidal velocity profile.

use serde::{Deserialize, Serialize};

use super::config::JointLimits;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub position: f64,
    pub velocity: f64,
    /// Position setpoint.
    pub target: f64,
}

impl JointState {
    pub fn at_rest(position: f64) -> Self {
        JointState {
            position,
            velocity: 0.0,
            target: position,
        }
    }
}

/// Largest speed from which the joint can still stop exactly on a point
/// `distance` away, decelerating by at most `a_max * dt` per step.
///
/// The deceleration sequence `u, u + a dt, ..., u + (n-1) a dt` with the last
/// step `u` in `(0, a dt]` covers `dt * (n u + a dt n (n-1) / 2)`; solving for
/// the first term gives the admissible speed.
fn braking_speed(distance: f64, a_max: f64, dt: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let step_dist = a_max * dt * dt;
    let n = ((-1.0 + (1.0 + 8.0 * distance / step_dist).sqrt()) * 0.5)
        .ceil()
        .max(1.0);
    distance / (n * dt) + a_max * dt * (n - 1.0) * 0.5
}

/// Advances one joint by `dt` toward its setpoint.
///
/// Velocity changes by at most `a_max * dt` per call and never exceeds
/// `v_max`. The setpoint is clamped into the joint range; hitting a range
/// limit zeroes the velocity.
pub fn motor_track(joint: JointState, limits: &JointLimits, dt: f64) -> Result<JointState> {
    if !joint.target.is_finite() {
        return Err(Error::invalid(format!(
            "joint target is not finite: {}",
            joint.target
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let target = joint.target.clamp(limits.min, limits.max);
    let error = target - joint.position;
    let desired = braking_speed(error.abs(), limits.a_max, dt).min(limits.v_max);
    let desired = if error < 0.0 { -desired } else { desired };

    let dv = limits.a_max * dt;
    let mut velocity = joint.velocity + (desired - joint.velocity).clamp(-dv, dv);
    velocity = velocity.clamp(-limits.v_max, limits.v_max);

    let mut position = joint.position + velocity * dt;
    if position >= limits.max {
        position = limits.max;
        velocity = 0.0;
    } else if position <= limits.min {
        position = limits.min;
        velocity = 0.0;
    }
    Ok(JointState {
        position,
        velocity,
        target: joint.target,
    })
}
