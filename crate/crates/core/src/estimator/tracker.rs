//! Latency-compensated ball tracking over a delayed detection stream.

use std::collections::VecDeque;

use nalgebra::Matrix2;
use rand::Rng;

use super::filter::{
    kf_predict_frames, kf_update, measurement_covariance, predict_ahead, FilterParams, FilterState,
};
use super::sensor::{render_measurement, CameraModel, Detection, ObjectId, SensorConfig};
use crate::error::Result;
use crate::physics::{BallState, TableConfig, WorldState};

/// Filters the ball from camera frames that arrive `latency_frames` late and
/// predicts the track forward to the present frame.
#[derive(Clone, Debug)]
pub struct BallTracker {
    pub sensor: SensorConfig,
    pub camera: CameraModel,
    filter: FilterState,
    r: Matrix2<f64>,
    pending: VecDeque<Detection>,
    frame: u64,
    started: bool,
}

impl BallTracker {
    pub fn new(sensor: SensorConfig, camera: CameraModel, params: FilterParams) -> Result<Self> {
        sensor.validate()?;
        camera.validate()?;
        let r = measurement_covariance(sensor.noise_sigma_px, &camera);
        Ok(BallTracker {
            sensor,
            camera,
            filter: FilterState::new(params),
            r,
            pending: VecDeque::new(),
            frame: 0,
            started: false,
        })
    }

    pub fn reset(&mut self) {
        self.filter = FilterState::new(self.filter.params);
        self.pending.clear();
        self.frame = 0;
        self.started = false;
    }

    pub fn filter(&self) -> &FilterState {
        &self.filter
    }

    /// Frame index of the most recent [`BallTracker::observe`] call.
    pub fn frame(&self) -> u64 {
        self.frame.saturating_sub(1)
    }

    /// Queues a detection taken at the current frame, folds in every
    /// detection that is at least `latency_frames` old and returns the
    /// estimate for the current frame.
    pub fn push(&mut self, detection: Detection, table: &TableConfig) -> Result<Option<BallState>> {
        let now = self.frame;
        self.frame += 1;
        self.pending.push_back(detection);
        let latency = self.sensor.latency_frames as u64;
        while let Some(d) = self.pending.front() {
            if d.frame + latency > now {
                break;
            }
            let d = self.pending.pop_front().expect("front exists");
            self.incorporate(&d, table)?;
        }
        self.estimate(now, table)
    }

    fn incorporate(&mut self, d: &Detection, table: &TableConfig) -> Result<()> {
        if self.filter.ball.is_some() && d.frame > self.filter.frame {
            let gap = d.frame - self.filter.frame;
            self.filter = kf_predict_frames(&self.filter, gap, self.sensor.frame_dt(), table)?;
        }
        if self.filter.ball.is_none() {
            self.filter.frame = d.frame;
        }
        self.filter = kf_update(&self.filter, d, &self.camera, &self.r)?;
        self.filter.frame = d.frame;
        Ok(())
    }

    fn estimate(&self, now: u64, table: &TableConfig) -> Result<Option<BallState>> {
        if self.filter.ball.is_none() {
            return Ok(None);
        }
        let ahead = now.saturating_sub(self.filter.frame);
        predict_ahead(&self.filter, ahead, self.sensor.frame_dt(), table).map(Some)
    }

    /// Renders a detection of `world` for the current frame and pushes it.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        world: &WorldState,
        table: &TableConfig,
        rng: &mut R,
    ) -> Result<Option<BallState>> {
        let d = render_measurement(
            world,
            table,
            &[ObjectId::Ball],
            &self.camera,
            &self.sensor,
            self.frame,
            rng,
        )?;
        self.push(d[0], table)
    }
}
