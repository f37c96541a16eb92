//! Synthetic detections and Kalman tracking with latency compensation.
//!
//! The ball filter predicts through the same free-flight integrator as the
//! simulator, so wall bounces are part of the motion model. Figurine contacts
//! are not modelled; they show up as gated detections that eventually
//! restart the track.

pub mod bench;
pub mod filter;
pub mod sensor;
pub mod tracker;

pub use bench::{
    pooled_rmse, run_estimator_bench, run_suite, BenchReport, BenchScenario, BenchSummary,
    ScenarioKind, SuiteConfig, SuiteReport,
};
pub use filter::{
    extrapolate_naive, kf_predict, kf_predict_frames, kf_update, measurement_covariance,
    predict_ahead, BallTrack, FilterParams, FilterState, RodTrack,
};
pub use sensor::{render_measurement, CameraModel, Detection, ObjectId, SensorConfig};
pub use tracker::BallTracker;
