//! End-to-end estimation pipeline: normalize, detect, recover, smooth.

use crate::error::Error;
use crate::freefall::{recover_stream, RecoveryOutput};
use crate::imu::{detect_saturation, normalize_stream, ImuSample, RigConfig, SaturationWindow};
use crate::scalar::Scalar;
use crate::smoother::{smooth, SmoothedTrajectory};

#[derive(Clone, Debug)]
pub struct PipelineOutput<S: Scalar> {
    pub windows: Vec<SaturationWindow>,
    pub recovery: RecoveryOutput<S>,
    pub trajectory: SmoothedTrajectory<S>,
}

/// Run the full estimation chain over a raw measurement stream.
pub fn estimate<S: Scalar>(
    samples: Vec<ImuSample<S>>,
    cfg: &RigConfig<S>,
) -> Result<PipelineOutput<S>, Error> {
    cfg.validate()?;
    let stream = normalize_stream(samples)?;
    let windows = detect_saturation(&stream, cfg);
    let recovery = recover_stream(&stream, &windows, cfg);
    let trajectory = smooth(&recovery.estimates, cfg.jerk_psd)?;
    Ok(PipelineOutput {
        windows,
        recovery,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imu::AxisSource;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn unsaturated_stream_smooths_to_passthrough() {
        let cfg = RigConfig::<f64>::default();
        let samples: Vec<ImuSample<f64>> = (0..20)
            .map(|i| {
                ImuSample::new(
                    i as f64 * 0.01,
                    Vector3::new(2.0, -1.0, 0.5),
                    Vector3::zeros(),
                )
            })
            .collect();
        let out = estimate(samples, &cfg).unwrap();
        assert!(out.windows.is_empty());
        let (omega, _) = out.trajectory.query(0.1).unwrap();
        assert_relative_eq!(omega, Vector3::new(2.0, -1.0, 0.5), epsilon = 1e-6);
        assert!(out
            .recovery
            .estimates
            .iter()
            .all(|e| e.source == [AxisSource::Measured; 3]));
    }

    #[test]
    fn too_short_stream_errors() {
        let cfg = RigConfig::<f64>::default();
        let samples = vec![ImuSample::new(0.0, Vector3::zeros(), Vector3::zeros())];
        assert!(estimate(samples, &cfg).is_err());
    }
}
