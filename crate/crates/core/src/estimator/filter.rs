//! Constant-velocity Kalman tracking of the ball and rod carriages.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::sensor::{CameraModel, Detection, ObjectId};
use crate::error::{Error, Result};
use crate::physics::{advance_free, BallState, TableConfig, Vec2};

/// Smallest measurement variance in m², keeping covariances invertible for
/// noiseless sensors.
pub const MIN_MEASUREMENT_VAR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// White-noise acceleration intensity of the ball track, m/s².
    pub sigma_a_ball: f64,
    /// White-noise acceleration intensity of rod tracks, m/s².
    pub sigma_a_rod: f64,
    /// Mahalanobis distance above which a detection is ignored.
    pub gate: f64,
    /// Initial position and velocity variance of a new track.
    pub init_var: f64,
    /// Consecutive gated detections after which the track restarts.
    pub reinit_after: u32,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            sigma_a_ball: 0.02,
            sigma_a_rod: 2.0,
            gate: 5.0,
            init_var: 1e4,
            reinit_after: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallTrack {
    /// `[x, y, vx, vy]`
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
    pub rejected: u32,
}

impl BallTrack {
    pub fn state(&self) -> BallState {
        BallState::new(
            Vec2::new(self.mean[0], self.mean[1]),
            Vec2::new(self.mean[2], self.mean[3]),
        )
    }
}

/// Carriage offset track `[p, p_dot]` of one rod.
#[derive(Clone, Debug, PartialEq)]
pub struct RodTrack {
    pub rod: usize,
    /// Lateral position of the tracked figurine with the carriage centred.
    pub base_y: f64,
    pub estimate: Option<(Vector2<f64>, Matrix2<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub params: FilterParams,
    pub ball: Option<BallTrack>,
    pub rods: Vec<RodTrack>,
    /// Frame index the means refer to.
    pub frame: u64,
}

impl FilterState {
    pub fn new(params: FilterParams) -> Self {
        FilterState {
            params,
            ball: None,
            rods: Vec::new(),
            frame: 0,
        }
    }

    pub fn with_rods(params: FilterParams, table: &TableConfig, rods: &[usize]) -> Self {
        let rods = rods
            .iter()
            .map(|&rod| RodTrack {
                rod,
                base_y: table.rods[rod].figurine_base_y(0),
                estimate: None,
            })
            .collect();
        FilterState {
            params,
            ball: None,
            rods,
            frame: 0,
        }
    }
}

/// Continuous white-noise acceleration covariance for one axis.
fn axis_q(q: f64, dt: f64) -> Matrix2<f64> {
    let (dt2, dt3) = (dt * dt, dt * dt * dt);
    Matrix2::new(dt3 / 3.0, dt2 / 2.0, dt2 / 2.0, dt) * q
}

fn ball_q(sigma_a: f64, dt: f64) -> Matrix4<f64> {
    let a = axis_q(sigma_a * sigma_a, dt);
    let mut q = Matrix4::zeros();
    for axis in 0..2 {
        let (p, v) = (axis, axis + 2);
        q[(p, p)] = a[(0, 0)];
        q[(p, v)] = a[(0, 1)];
        q[(v, p)] = a[(1, 0)];
        q[(v, v)] = a[(1, 1)];
    }
    q
}

fn cv_transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn symmetrize4(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

fn predict_rods(rods: &mut [RodTrack], sigma_a: f64, dt: f64) {
    let f = Matrix2::new(1.0, dt, 0.0, 1.0);
    let q = axis_q(sigma_a * sigma_a, dt);
    for track in rods {
        if let Some((mean, cov)) = &mut track.estimate {
            *mean = f * *mean;
            let p = f * *cov * f.transpose() + q;
            *cov = (p + p.transpose()) * 0.5;
        }
    }
}

/// Constant-velocity prediction of every track by `dt` seconds.
pub fn kf_predict(fs: &FilterState, dt: f64) -> Result<FilterState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!(
            "prediction step must be positive, got {dt}"
        )));
    }
    let mut next = fs.clone();
    if let Some(track) = &mut next.ball {
        let f = cv_transition(dt);
        track.mean = f * track.mean;
        track.cov = symmetrize4(f * track.cov * f.transpose() + ball_q(fs.params.sigma_a_ball, dt));
    }
    predict_rods(&mut next.rods, fs.params.sigma_a_rod, dt);
    Ok(next)
}

/// Substeps used to cover one camera frame with the physics integrator.
fn frame_substeps(frame_dt: f64, table: &TableConfig) -> (usize, f64) {
    let n = (frame_dt / table.physics_dt - 1e-9).ceil().max(1.0) as usize;
    (n, frame_dt / n as f64)
}

/// Free-flight propagation of a ball mean over `frames` camera frames.
///
/// Uses the simulator's own integrator, including rolling friction and,
/// when `walls` is set, the wall law. Returns the propagated state and the
/// Jacobian of the map, treating friction as locally constant.
fn propagate(
    ball: BallState,
    frames: u64,
    frame_dt: f64,
    table: &TableConfig,
    walls: bool,
) -> (BallState, Matrix4<f64>) {
    let (n, dt) = frame_substeps(frame_dt, table);
    let mut state = BallState {
        status: crate::physics::BallStatus::InPlay,
        ..ball
    };
    let mut jac = Matrix4::identity();
    let step = cv_transition(dt);
    let (e, f) = (table.wall_restitution, table.wall_tangential_factor);
    for _ in 0..frames * n as u64 {
        let contact = advance_free(&mut state, table, dt, walls);
        let mut j = step;
        if contact.side_wall {
            j = Matrix4::from_diagonal(&Vector4::new(1.0, -e, f, -e)) * j;
        }
        if contact.end_wall {
            j = Matrix4::from_diagonal(&Vector4::new(-e, 1.0, -e, f)) * j;
        }
        jac = j * jac;
    }
    (state, jac)
}

/// Prediction of the ball track by `frames` camera frames through the wall
/// law, plus constant-velocity prediction of the rod tracks.
pub fn kf_predict_frames(
    fs: &FilterState,
    frames: u64,
    frame_dt: f64,
    table: &TableConfig,
) -> Result<FilterState> {
    if frames == 0 {
        return Ok(fs.clone());
    }
    let dt = frames as f64 * frame_dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!(
            "frame duration must be positive, got {frame_dt}"
        )));
    }
    let mut next = fs.clone();
    next.frame += frames;
    if let Some(track) = &mut next.ball {
        let (state, jac) = propagate(track.state(), frames, frame_dt, table, true);
        track.mean = Vector4::new(
            state.position.x,
            state.position.y,
            state.velocity.x,
            state.velocity.y,
        );
        track.cov =
            symmetrize4(jac * track.cov * jac.transpose() + ball_q(fs.params.sigma_a_ball, dt));
    }
    predict_rods(&mut next.rods, fs.params.sigma_a_rod, dt);
    Ok(next)
}

/// World-coordinate measurement covariance of a pixel-noise sensor.
pub fn measurement_covariance(noise_sigma_px: f64, cam: &CameraModel) -> Matrix2<f64> {
    let var = |s: f64| (noise_sigma_px / s).powi(2).max(MIN_MEASUREMENT_VAR);
    Matrix2::new(var(cam.scale[0]), 0.0, 0.0, var(cam.scale[1]))
}

fn check_spd(r: &Matrix2<f64>) -> Result<()> {
    let symmetric = (r[(0, 1)] - r[(1, 0)]).abs() <= 1e-12 * r.abs().max();
    if !symmetric || r.iter().any(|v| !v.is_finite()) || r.cholesky().is_none() {
        return Err(Error::contract(
            "measurement covariance must be symmetric positive-definite",
        ));
    }
    Ok(())
}

const H_BALL: Matrix2x4<f64> = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);

fn ball_update(track: &mut BallTrack, z: Vector2<f64>, r: &Matrix2<f64>, s_inv: &Matrix2<f64>) {
    let k: Matrix4x2<f64> = track.cov * H_BALL.transpose() * s_inv;
    let ikh = Matrix4::identity() - k * H_BALL;
    track.mean += k * (z - H_BALL * track.mean);
    track.cov = symmetrize4(ikh * track.cov * ikh.transpose() + k * r * k.transpose());
}

/// Uninformative prior centred on the first detection, conditioned on it:
/// the position inherits the measurement covariance, the velocity stays
/// unknown.
fn init_ball(z: Vector2<f64>, r: &Matrix2<f64>, params: &FilterParams) -> Result<BallTrack> {
    let mut track = BallTrack {
        mean: Vector4::new(z[0], z[1], 0.0, 0.0),
        cov: Matrix4::identity() * params.init_var,
        rejected: 0,
    };
    let s = H_BALL * track.cov * H_BALL.transpose() + r;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::NonFinite("singular innovation covariance".into()))?;
    ball_update(&mut track, z, r, &s_inv);
    Ok(track)
}

fn rod_update(mean: &mut Vector2<f64>, cov: &mut Matrix2<f64>, p: f64, var: f64) {
    let s = cov[(0, 0)] + var;
    let k = Vector2::new(cov[(0, 0)], cov[(1, 0)]) / s;
    let ikh = Matrix2::identity() - Matrix2::new(k[0], 0.0, k[1], 0.0);
    *mean += k * (p - mean[0]);
    let updated = ikh * *cov * ikh.transpose() + k * k.transpose() * var;
    *cov = (updated + updated.transpose()) * 0.5;
}

/// Linear update with a world-coordinate position measurement.
///
/// Absent detections leave the state unchanged. A detection beyond the gate
/// is ignored unless it is the `reinit_after`-th in a row, in which case the
/// track restarts at the measurement.
pub fn kf_update(
    fs: &FilterState,
    d: &Detection,
    cam: &CameraModel,
    r: &Matrix2<f64>,
) -> Result<FilterState> {
    check_spd(r)?;
    let Some(pixel) = d.pixel else {
        return Ok(fs.clone());
    };
    let z = cam.to_world(pixel);
    if !z.is_finite() {
        return Err(Error::NonFinite(format!("detection {pixel:?}")));
    }
    let params = fs.params;
    let mut next = fs.clone();
    next.frame = d.frame;
    match d.object {
        ObjectId::Ball => {
            let z = Vector2::new(z.x, z.y);
            let Some(track) = &mut next.ball else {
                next.ball = Some(init_ball(z, r, &params)?);
                return Ok(next);
            };
            let s = H_BALL * track.cov * H_BALL.transpose() + r;
            let s_inv = s
                .try_inverse()
                .ok_or_else(|| Error::NonFinite("singular innovation covariance".into()))?;
            let innovation = z - H_BALL * track.mean;
            let d2 = (innovation.transpose() * s_inv * innovation)[(0, 0)];
            if d2.sqrt() > params.gate {
                track.rejected += 1;
                if track.rejected >= params.reinit_after {
                    *track = init_ball(z, r, &params)?;
                }
                return Ok(next);
            }
            ball_update(track, z, r, &s_inv);
            track.rejected = 0;
        }
        ObjectId::Rod { index } => {
            let Some(track) = next.rods.iter_mut().find(|t| t.rod == index) else {
                return Err(Error::invalid(format!("rod {index} is not tracked")));
            };
            let p = z.y - track.base_y;
            let var = r[(1, 1)];
            let Some((mean, cov)) = &mut track.estimate else {
                let (mut mean, mut cov) =
                    (Vector2::new(p, 0.0), Matrix2::identity() * params.init_var);
                rod_update(&mut mean, &mut cov, p, var);
                track.estimate = Some((mean, cov));
                return Ok(next);
            };
            if (p - mean[0]).abs() / (cov[(0, 0)] + var).sqrt() > params.gate {
                return Ok(next);
            }
            rod_update(mean, cov, p, var);
        }
    }
    Ok(next)
}

/// Ball state `horizon_frames` ahead of the track, bouncing off walls.
pub fn predict_ahead(
    fs: &FilterState,
    horizon_frames: u64,
    frame_dt: f64,
    table: &TableConfig,
) -> Result<BallState> {
    let track = fs
        .ball
        .as_ref()
        .ok_or_else(|| Error::contract("no ball track to predict from"))?;
    Ok(propagate(track.state(), horizon_frames, frame_dt, table, true).0)
}

/// Same integrator without walls: extrapolation that ignores the table.
pub fn extrapolate_naive(
    fs: &FilterState,
    horizon_frames: u64,
    frame_dt: f64,
    table: &TableConfig,
) -> Result<BallState> {
    let track = fs
        .ball
        .as_ref()
        .ok_or_else(|| Error::contract("no ball track to predict from"))?;
    Ok(propagate(track.state(), horizon_frames, frame_dt, table, false).0)
}
