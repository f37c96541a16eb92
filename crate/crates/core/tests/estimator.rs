// the oracles index explicitly to mirror the matrix formulas
#![allow(clippy::needless_range_loop)]

use nalgebra::{Matrix2, Matrix4, Vector4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use foosball::estimator::{
    kf_predict, kf_update, measurement_covariance, predict_ahead, run_suite, BallTrack,
    BallTracker, CameraModel, Detection, FilterParams, FilterState, ObjectId, SensorConfig,
    SuiteConfig,
};
use foosball::physics::{step_world, RodMask, TableConfig, Vec2, WorldState, DEFAULT_SUBSTEPS};

fn random_spd(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    a * a.transpose() + Matrix4::identity() * 0.1
}

fn track_state(mean: [f64; 4], cov: Matrix4<f64>, params: FilterParams) -> FilterState {
    let mut fs = FilterState::new(params);
    fs.ball = Some(BallTrack {
        mean: Vector4::from(mean),
        cov,
        rejected: 0,
    });
    fs
}

/// Textbook Kalman update written out element by element.
fn oracle_update(
    x: [f64; 4],
    p: [[f64; 4]; 4],
    z: [f64; 2],
    r: [f64; 2],
) -> ([f64; 4], [[f64; 4]; 4]) {
    let s = [[p[0][0] + r[0], p[0][1]], [p[1][0], p[1][1] + r[1]]];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let si = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    let mut k = [[0.0; 2]; 4];
    for i in 0..4 {
        for j in 0..2 {
            k[i][j] = p[i][0] * si[0][j] + p[i][1] * si[1][j];
        }
    }
    let innov = [z[0] - x[0], z[1] - x[1]];
    let mut xn = x;
    for i in 0..4 {
        xn[i] += k[i][0] * innov[0] + k[i][1] * innov[1];
    }
    // P' = (I - K H) P
    let mut pn = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            pn[i][j] = p[i][j] - (k[i][0] * p[0][j] + k[i][1] * p[1][j]);
        }
    }
    (xn, pn)
}

#[test]
fn update_matches_textbook_kalman_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cam = CameraModel::default();
    let params = FilterParams {
        gate: f64::INFINITY,
        ..FilterParams::default()
    };
    for _ in 0..500 {
        let cov = random_spd(&mut rng);
        let mean = [
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.3..0.3),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ];
        let fs = track_state(mean, cov, params);
        let zw = Vec2::new(
            mean[0] + rng.random_range(-0.1..0.1),
            mean[1] + rng.random_range(-0.1..0.1),
        );
        let d = Detection {
            object: ObjectId::Ball,
            pixel: Some(cam.to_pixel(zw)),
            frame: 1,
        };
        let r = Matrix2::new(
            rng.random_range(1e-6..1e-2),
            0.0,
            0.0,
            rng.random_range(1e-6..1e-2),
        );
        let next = kf_update(&fs, &d, &cam, &r).unwrap();
        let got = next.ball.unwrap();
        let z = cam.to_world(cam.to_pixel(zw));
        let p: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)]));
        let (xo, po) = oracle_update(mean, p, [z.x, z.y], [r[(0, 0)], r[(1, 1)]]);
        for i in 0..4 {
            assert!((got.mean[i] - xo[i]).abs() < 1e-9 * (1.0 + xo[i].abs()));
            for j in 0..4 {
                assert!((got.cov[(i, j)] - po[i][j]).abs() < 1e-9 * (1.0 + po[i][j].abs()));
            }
        }
    }
}

#[test]
fn predict_matches_white_noise_acceleration_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let cov = random_spd(&mut rng);
        let sigma = rng.random_range(0.0..10.0);
        let dt = rng.random_range(1e-3..0.1);
        let params = FilterParams {
            sigma_a_ball: sigma,
            ..FilterParams::default()
        };
        let fs = track_state([0.1, -0.2, 1.5, -2.5], cov, params);
        let next = kf_predict(&fs, dt).unwrap().ball.unwrap();
        assert!((next.mean[0] - (0.1 + 1.5 * dt)).abs() < 1e-15);
        assert!((next.mean[1] - (-0.2 - 2.5 * dt)).abs() < 1e-15);
        let q = sigma * sigma;
        for axis in 0..2 {
            let (p, v) = (axis, axis + 2);
            let pp =
                cov[(p, p)] + 2.0 * dt * cov[(p, v)] + dt * dt * cov[(v, v)] + q * dt.powi(3) / 3.0;
            let pv = cov[(p, v)] + dt * cov[(v, v)] + q * dt * dt / 2.0;
            let vv = cov[(v, v)] + q * dt;
            assert!((next.cov[(p, p)] - pp).abs() < 1e-12);
            assert!((next.cov[(p, v)] - pv).abs() < 1e-12);
            assert!((next.cov[(v, v)] - vv).abs() < 1e-12);
        }
    }
}

/// With the true state as the track mean, prediction through a wall
/// coincides with the simulator on an empty table.
#[test]
fn bounce_prediction_matches_simulator() {
    let table = TableConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bounces = 0;
    for _ in 0..300 {
        let mut w = WorldState::centered(RodMask::NONE);
        w.ball.position = Vec2::new(rng.random_range(-0.4..0.4), rng.random_range(-0.3..0.3));
        w.ball.velocity = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-8.0..8.0));
        let fs = track_state(
            [
                w.ball.position.x,
                w.ball.position.y,
                w.ball.velocity.x,
                w.ball.velocity.y,
            ],
            Matrix4::identity(),
            FilterParams::default(),
        );
        let predicted = predict_ahead(&fs, 6, 1.0 / 60.0, &table).unwrap();
        let start_vy = w.ball.velocity.y;
        for _ in 0..6 {
            w = step_world(&w, &w.targets(), &table, DEFAULT_SUBSTEPS)
                .unwrap()
                .0;
        }
        if !w.ball.in_play() {
            continue;
        }
        bounces += (w.ball.velocity.y * start_vy < 0.0) as usize;
        assert!((predicted.position - w.ball.position).norm() < 1e-12);
        assert!((predicted.velocity - w.ball.velocity).norm() < 1e-12);
    }
    assert!(bounces > 50);
}

#[test]
fn noiseless_camera_tracks_exactly() {
    let table = TableConfig::default();
    let mut t = BallTracker::new(
        SensorConfig::noiseless(),
        CameraModel::default(),
        FilterParams::default(),
    )
    .unwrap();
    let mut w = WorldState::centered(RodMask::NONE);
    w.ball.position = Vec2::new(-0.3, 0.05);
    w.ball.velocity = Vec2::new(2.0, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for frame in 0..60 {
        let est = t.observe(&w, &table, &mut rng).unwrap().unwrap();
        if frame >= 10 {
            worst = worst.max((est.position - w.ball.position).norm());
        }
        w = step_world(&w, &w.targets(), &table, DEFAULT_SUBSTEPS)
            .unwrap()
            .0;
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn reduced_suite_meets_thresholds() {
    let cfg = SuiteConfig {
        seed: 77,
        free_runs: 15,
        bounce_runs: 15,
        ..SuiteConfig::default()
    };
    let (report, runs) = run_suite(&cfg, &TableConfig::default()).unwrap();
    assert_eq!(runs.len(), 30);
    assert!(report.rmse_ratio <= 0.5, "{report:?}");
    assert!(report.bounce_win_rate >= 0.9, "{report:?}");
    assert!(report.noiseless_rmse < 1e-4, "{report:?}");
}

fn ball_detection(cam: &CameraModel, x: f64, y: f64, frame: u64) -> Detection {
    Detection {
        object: ObjectId::Ball,
        pixel: Some(cam.to_pixel(Vec2::new(x, y))),
        frame,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Detections newer than the latency window never influence an estimate.
    #[test]
    fn no_future_leakage(seed in any::<u64>(), latency in 0u32..5, split in 3u64..30) {
        let table = TableConfig::default();
        let cam = CameraModel::default();
        let sensor = SensorConfig { latency_frames: latency, ..SensorConfig::default() };
        let mut a = BallTracker::new(sensor.clone(), cam, FilterParams::default()).unwrap();
        let mut b = a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for frame in 0..40u64 {
            let (x, y) = (-0.3 + 0.02 * frame as f64, 0.1 - 0.005 * frame as f64);
            let da = ball_detection(&cam, x, y, frame);
            // b sees a different stream from `split` on
            let db = if frame >= split {
                ball_detection(&cam, x + rng.random_range(-0.05..0.05), y + rng.random_range(-0.05..0.05), frame)
            } else {
                da
            };
            let ea = a.push(da, &table).unwrap();
            let eb = b.push(db, &table).unwrap();
            if frame < split + latency as u64 {
                prop_assert_eq!(ea, eb);
            }
        }
    }

    #[test]
    fn covariance_stays_symmetric_positive(seed in any::<u64>()) {
        let table = TableConfig::default();
        let cam = CameraModel::default();
        let sensor = SensorConfig::default();
        let r = measurement_covariance(sensor.noise_sigma_px, &cam);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fs = FilterState::new(FilterParams::default());
        for frame in 0..50u64 {
            if fs.ball.is_some() {
                fs = foosball::estimator::kf_predict_frames(&fs, 1, sensor.frame_dt(), &table).unwrap();
            }
            let d = if rng.random_bool(0.1) {
                Detection { object: ObjectId::Ball, pixel: None, frame }
            } else {
                ball_detection(&cam, rng.random_range(-0.5..0.5), rng.random_range(-0.3..0.3), frame)
            };
            fs = kf_update(&fs, &d, &cam, &r).unwrap();
            if let Some(t) = &fs.ball {
                prop_assert!((t.cov - t.cov.transpose()).abs().max() < 1e-12 * (1.0 + t.cov.abs().max()));
                prop_assert!(t.cov.symmetric_eigenvalues().iter().all(|&e| e > -1e-12));
            }
        }
    }
}
