//! Seeded tracking benchmarks against simulator ground truth.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::{
    extrapolate_naive, kf_predict_frames, kf_update, measurement_covariance, predict_ahead,
    FilterParams, FilterState,
};
use super::sensor::{render_measurement, CameraModel, ObjectId, SensorConfig};
use super::tracker::BallTracker;
use crate::error::{Error, Result};
use crate::physics::{step_world, BallState, RodMask, TableConfig, Vec2, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Ball rolling through the middle of the table at moderate speed.
    Free,
    /// Ball aimed across the table at a side wall.
    Bounce,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub frames: usize,
    pub horizon: u64,
    /// Frames after the start or a bounce before tracking counts as steady.
    pub settle_frames: usize,
}

impl BenchScenario {
    pub fn free(seed: u64) -> Self {
        BenchScenario {
            kind: ScenarioKind::Free,
            seed,
            frames: 240,
            horizon: 6,
            settle_frames: 20,
        }
    }

    pub fn bounce(seed: u64) -> Self {
        BenchScenario {
            kind: ScenarioKind::Bounce,
            seed,
            frames: 90,
            horizon: 6,
            settle_frames: 20,
        }
    }

    fn initial_ball(&self, rng: &mut ChaCha8Rng) -> BallState {
        match self.kind {
            ScenarioKind::Free => {
                let p = Vec2::new(rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2));
                let speed = rng.random_range(1.0..4.0);
                let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                BallState::new(p, Vec2::new(speed * angle.cos(), speed * angle.sin()))
            }
            ScenarioKind::Bounce => {
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let p = Vec2::new(
                    rng.random_range(-0.3..0.3),
                    -side * rng.random_range(0.15..0.25),
                );
                let speed = rng.random_range(1.5..3.0);
                let tilt = rng.random_range(-0.7..0.7f64);
                BallState::new(p, Vec2::new(speed * tilt.sin(), side * speed * tilt.cos()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    /// `[x, y, vx, vy]` of the simulated ball.
    pub truth: [f64; 4],
    /// Raw detection in pixels; absent on dropped frames.
    pub meas: Option<[f64; 2]>,
    /// Posterior after folding in this frame's detection.
    pub filtered: Option<[f64; 4]>,
    /// Latency-compensated estimate available at this frame.
    pub estimate: Option<[f64; 4]>,
    /// Bounce-aware position prediction `horizon` frames ahead.
    pub prediction: Option<[f64; 2]>,
    /// Wall-free extrapolation over the same horizon.
    pub naive: Option<[f64; 2]>,
    pub steady: bool,
    /// A wall bounce happens within the prediction horizon.
    pub bounce_ahead: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub frames: usize,
    pub steady_frames: usize,
    /// Detections against truth of the same frame, steady frames only.
    pub raw_rmse: f64,
    /// Posterior against truth of the same frame, steady frames only.
    pub filtered_rmse: f64,
    /// Latency-compensated estimate against current truth.
    pub compensated_rmse: f64,
    /// Latest available (delayed) detection against current truth.
    pub delayed_raw_rmse: f64,
    pub bounce_frames: usize,
    pub prediction_rmse: f64,
    pub naive_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: BenchScenario,
    pub sensor: SensorConfig,
    pub frames: Vec<FrameRecord>,
    pub summary: BenchSummary,
}

#[derive(Default)]
struct Rms {
    sum: f64,
    n: usize,
}

impl Rms {
    fn add(&mut self, a: [f64; 2], b: [f64; 2]) {
        self.sum += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        self.n += 1;
    }

    fn value(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.sum / self.n as f64).sqrt()
        }
    }
}

fn vec4(b: &BallState) -> [f64; 4] {
    [b.position.x, b.position.y, b.velocity.x, b.velocity.y]
}

/// Runs one seeded scenario: simulate truth, render detections, filter,
/// predict, and score.
pub fn run_estimator_bench(
    scenario: &BenchScenario,
    sensor: &SensorConfig,
    params: &FilterParams,
    table: &TableConfig,
) -> Result<BenchReport> {
    sensor.validate()?;
    let cam = CameraModel::default();
    let frame_dt = sensor.frame_dt();
    let per_frame = frame_dt / table.physics_dt;
    let substeps = per_frame.round() as usize;
    if substeps == 0 || (per_frame - substeps as f64).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "frame rate {} does not divide the physics rate",
            sensor.fps
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut world = WorldState::centered(RodMask::NONE);
    world.ball = scenario.initial_ball(&mut rng);

    let h = scenario.horizon as usize;
    let mut truth = Vec::with_capacity(scenario.frames + h);
    for _ in 0..scenario.frames + h {
        truth.push(world.clone());
        world = step_world(&world, &world.targets(), table, substeps)?.0;
    }
    let flips: Vec<bool> = (0..truth.len())
        .map(|f| {
            f > 0 && {
                let (a, b) = (&truth[f - 1].ball.velocity, &truth[f].ball.velocity);
                a.x * b.x < 0.0 || a.y * b.y < 0.0
            }
        })
        .collect();

    let r = measurement_covariance(sensor.noise_sigma_px, &cam);
    let mut fs = FilterState::new(*params);
    let mut tracker = BallTracker::new(sensor.clone(), cam, *params)?;
    let mut records = Vec::with_capacity(scenario.frames);
    let mut last_reset = 0usize;
    for f in 0..scenario.frames {
        let state = &truth[f];
        let det = render_measurement(
            state,
            table,
            &[ObjectId::Ball],
            &cam,
            sensor,
            f as u64,
            &mut rng,
        )?[0];
        if fs.ball.is_some() {
            fs = kf_predict_frames(&fs, 1, frame_dt, table)?;
        }
        let had_track = fs.ball.is_some();
        fs = kf_update(&fs, &det, &cam, &r)?;
        fs.frame = f as u64;
        if flips[f]
            || (had_track
                && fs
                    .ball
                    .as_ref()
                    .is_some_and(|t| t.cov[(2, 2)] >= params.init_var))
        {
            last_reset = f;
        }
        let estimate = tracker.push(det, table)?;
        let (prediction, naive) = match fs.ball {
            Some(_) => {
                let p = predict_ahead(&fs, scenario.horizon, frame_dt, table)?.position;
                let n = extrapolate_naive(&fs, scenario.horizon, frame_dt, table)?.position;
                (Some([p.x, p.y]), Some([n.x, n.y]))
            }
            None => (None, None),
        };
        let steady = f >= scenario.settle_frames
            && f - last_reset >= scenario.settle_frames
            && state.ball.in_play()
            && truth[f..=f + h].iter().all(|w| w.ball.in_play());
        records.push(FrameRecord {
            frame: f as u64,
            truth: vec4(&state.ball),
            meas: det.pixel,
            filtered: fs.ball.as_ref().map(|t| vec4(&t.state())),
            estimate: estimate.as_ref().map(vec4),
            prediction,
            naive,
            steady,
            bounce_ahead: flips[f + 1..=f + h].iter().any(|&b| b) && truth[f + h].ball.in_play(),
        });
    }

    let summary = summarize(
        &records,
        &truth,
        &cam,
        sensor.latency_frames as usize,
        scenario,
    );
    Ok(BenchReport {
        scenario: *scenario,
        sensor: sensor.clone(),
        frames: records,
        summary,
    })
}

fn summarize(
    records: &[FrameRecord],
    truth: &[WorldState],
    cam: &CameraModel,
    latency: usize,
    scenario: &BenchScenario,
) -> BenchSummary {
    let (mut raw, mut filt, mut comp, mut delayed, mut pred, mut naive) = (
        Rms::default(),
        Rms::default(),
        Rms::default(),
        Rms::default(),
        Rms::default(),
        Rms::default(),
    );
    let h = scenario.horizon as usize;
    let mut steady_frames = 0;
    let mut bounce_frames = 0;
    for (f, rec) in records.iter().enumerate() {
        let t = [rec.truth[0], rec.truth[1]];
        if rec.steady {
            steady_frames += 1;
            if let (Some(m), Some(x)) = (rec.meas, rec.filtered) {
                let w = cam.to_world(m);
                raw.add([w.x, w.y], t);
                filt.add([x[0], x[1]], t);
            }
            if let Some(e) = rec.estimate {
                comp.add([e[0], e[1]], t);
            }
            if let Some(m) = f.checked_sub(latency).and_then(|g| records[g].meas) {
                let w = cam.to_world(m);
                delayed.add([w.x, w.y], t);
            }
        }
        if rec.bounce_ahead && f >= scenario.settle_frames.min(10) {
            if let (Some(p), Some(n)) = (rec.prediction, rec.naive) {
                bounce_frames += 1;
                let future = &truth[f + h].ball.position;
                pred.add(p, [future.x, future.y]);
                naive.add(n, [future.x, future.y]);
            }
        }
    }
    BenchSummary {
        frames: records.len(),
        steady_frames,
        raw_rmse: raw.value(),
        filtered_rmse: filt.value(),
        compensated_rmse: comp.value(),
        delayed_raw_rmse: delayed.value(),
        bounce_frames,
        prediction_rmse: pred.value(),
        naive_rmse: naive.value(),
    }
}

/// Pools per-frame errors of several runs into one steady-state RMSE pair
/// `(raw, filtered)`.
pub fn pooled_rmse(reports: &[BenchReport]) -> (f64, f64) {
    let cam = CameraModel::default();
    let (mut raw, mut filt) = (Rms::default(), Rms::default());
    for rec in reports.iter().flat_map(|r| &r.frames).filter(|r| r.steady) {
        if let (Some(m), Some(x)) = (rec.meas, rec.filtered) {
            let w = cam.to_world(m);
            raw.add([w.x, w.y], [rec.truth[0], rec.truth[1]]);
            filt.add([x[0], x[1]], [rec.truth[0], rec.truth[1]]);
        }
    }
    (raw.value(), filt.value())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub free_runs: usize,
    pub bounce_runs: usize,
    pub sensor: SensorConfig,
    pub filter: FilterParams,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            free_runs: 50,
            bounce_runs: 50,
            sensor: SensorConfig::default(),
            filter: FilterParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    /// Pooled steady-state RMSE of raw detections over the free runs.
    pub raw_rmse: f64,
    pub filtered_rmse: f64,
    pub rmse_ratio: f64,
    /// Bounce runs with at least one bounce inside the prediction horizon.
    pub bounce_runs: usize,
    /// Bounce runs where the bounce-aware prediction beat extrapolation.
    pub bounce_wins: usize,
    pub bounce_win_rate: f64,
    /// Steady-state filtered RMSE of the same free runs with a perfect camera.
    pub noiseless_rmse: f64,
}

/// Free-flight accuracy, bounce prediction and noiseless sanity over seeded
/// scenario sets. Returns the per-scenario reports alongside the summary.
pub fn run_suite(
    cfg: &SuiteConfig,
    table: &TableConfig,
) -> Result<(SuiteReport, Vec<BenchReport>)> {
    let mut free = Vec::with_capacity(cfg.free_runs);
    let mut clean = Vec::with_capacity(cfg.free_runs);
    for i in 0..cfg.free_runs as u64 {
        let sc = BenchScenario::free(cfg.seed.wrapping_add(i));
        free.push(run_estimator_bench(&sc, &cfg.sensor, &cfg.filter, table)?);
        clean.push(run_estimator_bench(
            &sc,
            &SensorConfig::noiseless(),
            &cfg.filter,
            table,
        )?);
    }
    let mut bounce = Vec::with_capacity(cfg.bounce_runs);
    for i in 0..cfg.bounce_runs as u64 {
        let sc = BenchScenario::bounce(cfg.seed.wrapping_add(1_000_000 + i));
        bounce.push(run_estimator_bench(&sc, &cfg.sensor, &cfg.filter, table)?);
    }
    let (raw_rmse, filtered_rmse) = pooled_rmse(&free);
    let scored: Vec<&BenchSummary> = bounce
        .iter()
        .map(|r| &r.summary)
        .filter(|s| s.bounce_frames > 0)
        .collect();
    let bounce_wins = scored
        .iter()
        .filter(|s| s.prediction_rmse < s.naive_rmse)
        .count();
    let report = SuiteReport {
        raw_rmse,
        filtered_rmse,
        rmse_ratio: filtered_rmse / raw_rmse,
        bounce_runs: scored.len(),
        bounce_wins,
        bounce_win_rate: bounce_wins as f64 / scored.len().max(1) as f64,
        noiseless_rmse: pooled_rmse(&clean).1,
    };
    free.extend(bounce);
    Ok((report, free))
}

/// One JSON object per frame followed by a summary record.
pub fn write_jsonl(report: &BenchReport, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for rec in &report.frames {
        serde_json::to_writer(
            &mut out,
            &serde_json::json!({ "type": "frame", "record": rec }),
        )?;
        out.write_all(b"\n")?;
    }
    let summary = serde_json::json!({
        "type": "summary",
        "scenario": report.scenario,
        "sensor": report.sensor,
        "summary": report.summary,
    });
    serde_json::to_writer(&mut out, &summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Units of the CSV export.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvUnits {
    /// Metres and metres per second.
    #[default]
    Si,
    /// Pixels and pixels per frame.
    Pixels,
}

#[derive(Serialize)]
struct CsvRow {
    frame: u64,
    truth_x: f64,
    truth_y: f64,
    meas_x: Option<f64>,
    meas_y: Option<f64>,
    est_x: Option<f64>,
    est_y: Option<f64>,
    est_vx: Option<f64>,
    est_vy: Option<f64>,
    pred_x: Option<f64>,
    pred_y: Option<f64>,
}

/// Plot data: one row per frame, empty cells where a value is unavailable.
pub fn write_csv(
    report: &BenchReport,
    path: &Path,
    units: CsvUnits,
    cam: &CameraModel,
) -> Result<()> {
    let frame_dt = report.sensor.frame_dt();
    let pos = |x: f64, y: f64| match units {
        CsvUnits::Si => [x, y],
        CsvUnits::Pixels => cam.to_pixel(Vec2::new(x, y)),
    };
    let vel = |vx: f64, vy: f64| match units {
        CsvUnits::Si => [vx, vy],
        CsvUnits::Pixels => [vx * cam.scale[0] * frame_dt, vy * cam.scale[1] * frame_dt],
    };
    let meas = |px: [f64; 2]| match units {
        CsvUnits::Si => {
            let w = cam.to_world(px);
            [w.x, w.y]
        }
        CsvUnits::Pixels => px,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Malformed(e.to_string()))?;
    for rec in &report.frames {
        let truth = pos(rec.truth[0], rec.truth[1]);
        let m = rec.meas.map(meas);
        let e = rec.estimate.map(|e| (pos(e[0], e[1]), vel(e[2], e[3])));
        let pr = rec.prediction.map(|p| pos(p[0], p[1]));
        let row = CsvRow {
            frame: rec.frame,
            truth_x: truth[0],
            truth_y: truth[1],
            meas_x: m.map(|m| m[0]),
            meas_y: m.map(|m| m[1]),
            est_x: e.map(|e| e.0[0]),
            est_y: e.map(|e| e.0[1]),
            est_vx: e.map(|e| e.1[0]),
            est_vy: e.map(|e| e.1[1]),
            pred_x: pr.map(|p| p[0]),
            pred_y: pr.map(|p| p[1]),
        };
        w.serialize(row)
            .map_err(|e| Error::Malformed(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
