//! Synthetic camera: projection, pixel noise and dropouts.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{TableConfig, Vec2, WorldState};

pub const MAX_FPS: f64 = 90.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub resolution: [u32; 2],
    pub fps: f64,
    pub noise_sigma_px: f64,
    pub dropout_prob: f64,
    pub latency_frames: u32,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            resolution: [1280, 720],
            fps: 60.0,
            noise_sigma_px: 2.0,
            dropout_prob: 0.05,
            latency_frames: 2,
        }
    }
}

impl SensorConfig {
    pub fn noiseless() -> Self {
        SensorConfig {
            noise_sigma_px: 0.0,
            dropout_prob: 0.0,
            latency_frames: 0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps <= MAX_FPS) {
            return Err(Error::invalid(format!(
                "fps must be in (0, {MAX_FPS}], got {}",
                self.fps
            )));
        }
        if !(self.noise_sigma_px >= 0.0 && self.noise_sigma_px.is_finite()) {
            return Err(Error::invalid("noise_sigma_px must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::invalid("dropout_prob must be in [0, 1)"));
        }
        if self.resolution.contains(&0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        Ok(())
    }

    pub fn frame_dt(&self) -> f64 {
        1.0 / self.fps
    }
}

/// Affine world to pixel map. The image `v` axis points down, so the
/// default scale flips `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    /// Pixels per metre along `u` and `v`.
    pub scale: [f64; 2],
    /// Pixel coordinates of the table centre.
    pub offset: [f64; 2],
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            scale: [1000.0, -1000.0],
            offset: [640.0, 360.0],
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self
            .scale
            .iter()
            .chain(&self.offset)
            .any(|v| !v.is_finite())
            || self.scale.contains(&0.0)
        {
            return Err(Error::invalid("camera scale must be finite and non-zero"));
        }
        Ok(())
    }

    pub fn to_pixel(&self, p: Vec2) -> [f64; 2] {
        [
            self.scale[0] * p.x + self.offset[0],
            self.scale[1] * p.y + self.offset[1],
        ]
    }

    pub fn to_world(&self, px: [f64; 2]) -> Vec2 {
        Vec2::new(
            (px[0] - self.offset[0]) / self.scale[0],
            (px[1] - self.offset[1]) / self.scale[1],
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectId {
    Ball,
    /// First figurine of a rod; its lateral position encodes the carriage offset.
    Rod {
        index: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub object: ObjectId,
    /// Pixel position; `None` when the object was not detected this frame.
    pub pixel: Option<[f64; 2]>,
    pub frame: u64,
}

impl Detection {
    pub fn present(&self) -> bool {
        self.pixel.is_some()
    }
}

/// True world position of a tracked object.
pub fn object_position(world: &WorldState, table: &TableConfig, object: ObjectId) -> Result<Vec2> {
    match object {
        ObjectId::Ball => Ok(world.ball.position),
        ObjectId::Rod { index } => {
            let rod = table
                .rods
                .get(index)
                .ok_or_else(|| Error::invalid(format!("no rod {index}")))?;
            Ok(Vec2::new(
                rod.x_position,
                rod.figurine_base_y(0) + world.rods[index].prismatic.position,
            ))
        }
    }
}

/// One camera frame: noisy projections of `objects`, each dropped
/// independently with `dropout_prob`.
pub fn render_measurement<R: Rng + ?Sized>(
    world: &WorldState,
    table: &TableConfig,
    objects: &[ObjectId],
    cam: &CameraModel,
    cfg: &SensorConfig,
    frame: u64,
    rng: &mut R,
) -> Result<Vec<Detection>> {
    let mut out = Vec::with_capacity(objects.len());
    for &object in objects {
        let truth = object_position(world, table, object)?;
        let dropped = cfg.dropout_prob > 0.0 && rng.random::<f64>() < cfg.dropout_prob;
        let pixel = if dropped {
            None
        } else {
            let [u, v] = cam.to_pixel(truth);
            if cfg.noise_sigma_px > 0.0 {
                let nu: f64 = rng.sample(StandardNormal);
                let nv: f64 = rng.sample(StandardNormal);
                Some([u + cfg.noise_sigma_px * nu, v + cfg.noise_sigma_px * nv])
            } else {
                Some([u, v])
            }
        };
        out.push(Detection {
            object,
            pixel,
            frame,
        });
    }
    Ok(out)
}
