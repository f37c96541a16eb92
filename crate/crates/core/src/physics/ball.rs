//! Ball state, rolling integration and the wall reflection law.
//!
//! The free-flight step here is shared by the physics stepper and the
//! estimator's look-ahead so both apply bit-identical motion.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::config::{TableConfig, Team};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "conceded_by")]
pub enum BallStatus {
    #[default]
    InPlay,
    /// The ball entered the goal defended by this team.
    InGoal(Team),
    OutOfTable,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub status: BallStatus,
}

impl BallState {
    pub fn new(position: Vec2, velocity: Vec2) -> Self {
        BallState {
            position,
            velocity,
            status: BallStatus::InPlay,
        }
    }

    pub fn in_play(&self) -> bool {
        self.status == BallStatus::InPlay
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }
}

/// Rolling friction: speed drops by `decel * dt` toward zero, direction kept.
pub fn apply_rolling_decel(velocity: Vec2, decel: f64, dt: f64) -> Vec2 {
    let speed = velocity.norm();
    let loss = decel * dt;
    if speed <= loss {
        Vec2::ZERO
    } else {
        velocity * ((speed - loss) / speed)
    }
}

/// Reflects one coordinate against a plane at `+limit` / `-limit`.
///
/// Returns the new (normal position, normal velocity) and whether a bounce
/// occurred. Overshoot past the plane is folded back scaled by restitution.
#[inline]
fn reflect_axis(pos: f64, vel: f64, limit: f64, restitution: f64) -> (f64, f64, bool) {
    if pos > limit {
        let overshoot = pos - limit;
        let p = limit - restitution * overshoot;
        if vel > 0.0 {
            (p, -restitution * vel, true)
        } else {
            (p, vel, false)
        }
    } else if pos < -limit {
        let overshoot = -limit - pos;
        let p = -limit + restitution * overshoot;
        if vel < 0.0 {
            (p, -restitution * vel, true)
        } else {
            (p, vel, false)
        }
    } else {
        (pos, vel, false)
    }
}

/// Outcome of applying the wall law after a position update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WallContact {
    pub side_wall: bool,
    pub end_wall: bool,
}

/// Side walls, end walls outside the goal mouth, and goal-line detection.
pub fn collide_walls(ball: &mut BallState, cfg: &TableConfig) -> WallContact {
    let mut contact = WallContact::default();
    let r = cfg.ball_radius;
    let e = cfg.wall_restitution;
    let f = cfg.wall_tangential_factor;

    let (y, vy, hit) = reflect_axis(ball.position.y, ball.velocity.y, cfg.half_width() - r, e);
    if hit {
        ball.velocity.x *= f;
        contact.side_wall = true;
    }
    ball.position.y = y;
    ball.velocity.y = vy;

    let in_mouth = ball.position.y.abs() < 0.5 * cfg.goal_width;
    if in_mouth {
        if ball.position.x.abs() > cfg.half_length() {
            let conceding = if ball.position.x > 0.0 {
                Team::Black
            } else {
                Team::White
            };
            ball.status = BallStatus::InGoal(conceding);
        }
    } else {
        let (x, vx, hit) = reflect_axis(ball.position.x, ball.velocity.x, cfg.half_length() - r, e);
        if hit {
            ball.velocity.y *= f;
            contact.end_wall = true;
        }
        ball.position.x = x;
        ball.velocity.x = vx;
    }
    contact
}

/// One substep of free ball motion: rolling friction, semi-implicit Euler
/// position update, then the wall law. Balls not in play are left untouched.
pub fn advance_free(ball: &mut BallState, cfg: &TableConfig, dt: f64, walls: bool) -> WallContact {
    if !ball.in_play() {
        return WallContact::default();
    }
    ball.velocity = apply_rolling_decel(ball.velocity, cfg.rolling_decel, dt);
    ball.position = ball.position + ball.velocity * dt;
    if walls {
        collide_walls(ball, cfg)
    } else {
        WallContact::default()
    }
}
