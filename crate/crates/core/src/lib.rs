//! Angular-velocity estimation under gyroscope saturation.
//!
//! When a tumbling body drives a gyroscope past its measurement range, the
//! clipped axis can be reconstructed from the centripetal acceleration
//! seen by an accelerometer mounted off the center of mass. This crate
//! provides that recovery ([`freefall`]), a continuous-time smoother that
//! fuses raw and recovered rates under a white-noise-on-jerk motion prior
//! ([`smoother`]), a rigid-body tumbling simulator serving as ground-truth
//! oracle ([`sim`]), and evaluation metrics over saturation windows
//! ([`metrics`]).
//!
//! Everything numeric is generic over the scalar type via [`Scalar`]
//! (`f32` or `f64`); timestamps are always `f64` seconds. The `*64`
//! aliases below cover the common double-precision case.

pub mod config;
pub mod error;
pub mod freefall;
pub mod imu;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod sim;
pub mod smoother;

pub use error::Error;
pub use scalar::Scalar;

/// Double-precision aliases for the pipeline types.
pub type ImuSample64 = imu::ImuSample<f64>;
pub type RigConfig64 = imu::RigConfig<f64>;
pub type VelocityEstimate64 = imu::VelocityEstimate<f64>;
pub type SmoothedTrajectory64 = smoother::SmoothedTrajectory<f64>;
pub type BodyModel64 = sim::BodyModel<f64>;
pub type SimState64 = sim::SimState<f64>;
pub type Scenario64 = sim::Scenario<f64>;
pub type BatchReport64 = metrics::BatchReport<f64>;
