//! Recovery of a saturated gyro axis from accelerometer measurements.
//!
//! A tumbling body in free fall rotates about an axis through its COM, so
//! the proper acceleration at an IMU offset from the COM is purely
//! rotational: a centripetal part `ω × (ω × t)` of magnitude `ω²·|r|`
//! pointing from the IMU toward the rotation axis, plus a tangential part
//! `ω̇ × t` orthogonal to it. Projecting the accelerometer reading onto the
//! direction of the lever arm isolates `ω²·|r|`; subtracting the two
//! unsaturated gyro readings squared leaves the saturated component
//! squared. The tangential part is never used: dividing by it would mean
//! integrating noise.
//!
//! The rotation axis itself is not observable while an axis is clipped, so
//! the axis of the previous fused estimate stands in for it — valid at IMU
//! rates because angular momentum keeps the axis from moving quickly
//! between samples.

use nalgebra::Vector3;

use crate::error::Error;
use crate::imu::{Axis, AxisSource, ImuSample, RigConfig, SaturationWindow, VelocityEstimate};
use crate::scalar::{cast, to_f64, Scalar};

/// Vector from the IMU to the nearest point on the rotation axis.
#[derive(Clone, Copy, Debug)]
pub struct LeverArm<S: Scalar> {
    pub r: Vector3<S>,
    pub magnitude: S,
}

/// Orthonormal frame at the IMU: x̂ toward the rotation axis, ẑ along it.
#[derive(Clone, Copy, Debug)]
pub struct RotationalFrame<S: Scalar> {
    pub x_hat: Vector3<S>,
    pub y_hat: Vector3<S>,
    pub z_hat: Vector3<S>,
}

impl<S: Scalar> RotationalFrame<S> {
    /// Express a body-frame vector in this frame.
    pub fn project(&self, v: &Vector3<S>) -> Vector3<S> {
        Vector3::new(self.x_hat.dot(v), self.y_hat.dot(v), self.z_hat.dot(v))
    }
}

/// Lever arm `r = (t·e)e − t` from the COM→IMU offset and the unit
/// rotation axis.
///
/// Errors when `e` is not unit within 1e-6 or when the lever arm is
/// shorter than `r_min` (IMU on or near the rotation axis).
pub fn lever_arm<S: Scalar>(
    com_to_imu: &Vector3<S>,
    e: &Vector3<S>,
    r_min: S,
) -> Result<LeverArm<S>, Error> {
    let norm = e.norm();
    if (to_f64(norm) - 1.0).abs() > 1e-6 {
        return Err(Error::NotUnitAxis { norm: to_f64(norm) });
    }
    // Renormalize so r ⟂ e holds to machine precision.
    let e = e / norm;
    let r = e * com_to_imu.dot(&e) - com_to_imu;
    let magnitude = r.norm();
    if magnitude < r_min {
        return Err(Error::DegenerateLeverArm {
            r_norm: to_f64(magnitude),
            r_min: to_f64(r_min),
        });
    }
    Ok(LeverArm { r, magnitude })
}

/// Frame with x̂ along the lever arm (toward the axis) and ẑ along the
/// rotation axis.
pub fn rotational_frame<S: Scalar>(e: &Vector3<S>, lever: &LeverArm<S>) -> RotationalFrame<S> {
    let x_hat = lever.r / lever.magnitude;
    let z_hat = e / e.norm();
    let y_hat = z_hat.cross(&x_hat);
    RotationalFrame {
        x_hat,
        y_hat,
        z_hat,
    }
}

/// Outcome of recovering one axis at one sample.
#[derive(Clone, Copy, Debug)]
pub struct AxisRecovery<S: Scalar> {
    /// Recovered rate, rad/s; `None` when the sample was rejected.
    pub value: Option<S>,
    pub source: AxisSource,
}

impl<S: Scalar> AxisRecovery<S> {
    fn rejected() -> Self {
        AxisRecovery {
            value: None,
            source: AxisSource::Rejected,
        }
    }
}

/// Recover the saturated component of the angular velocity at one sample.
///
/// `e_prev` is the rotation axis of the previous fused estimate (need not
/// be exactly unit; it is normalized). The saturated gyro reading is used
/// only for its sign. Negative radicands reject the sample; magnitudes
/// below the saturation floor are clamped up to it.
pub fn recover_axis<S: Scalar>(
    sample: &ImuSample<S>,
    axis: Axis,
    e_prev: &Vector3<S>,
    cfg: &RigConfig<S>,
) -> Result<AxisRecovery<S>, Error> {
    if let Some(rail) = cfg.accel_rail {
        // A railed accelerometer axis carries no centripetal information.
        let near_rail = rail * cast(1.0 - 1e-9);
        if sample.accel.iter().any(|&a| a.abs() >= near_rail) {
            return Ok(AxisRecovery::rejected());
        }
    }
    let lever = lever_arm(&cfg.com_to_imu, e_prev, cfg.r_min)?;
    let frame = rotational_frame(e_prev, &lever);

    // Centripetal component of the accelerometer reading, ω²·|r| under
    // the free-fall model.
    let a_x = sample.accel.dot(&frame.x_hat);
    let [u1, u2] = axis.others();
    let w1 = sample.gyro[u1.index()];
    let w2 = sample.gyro[u2.index()];
    let radicand = a_x / lever.magnitude - w1 * w1 - w2 * w2;
    if radicand < S::zero() {
        return Ok(AxisRecovery::rejected());
    }

    let floor = cfg.saturation_floor(axis);
    let magnitude = radicand.sqrt().max(floor);

    // The clipped reading keeps the true sign; a clipped zero cannot occur
    // physically, so fall back to continuity with the previous axis.
    let clipped = sample.gyro[axis.index()];
    let reference = if clipped != S::zero() {
        clipped
    } else {
        e_prev[axis.index()]
    };
    let value = if reference < S::zero() {
        -magnitude
    } else {
        magnitude
    };
    Ok(AxisRecovery {
        value: Some(value),
        source: AxisSource::Recovered,
    })
}

/// Why a whole window was left to the smoother.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefusalReason {
    /// Window starts at the first sample: no prior rotation axis.
    NoPriorAxis,
    /// Window overlaps a window on another axis.
    MultiAxisSaturation,
}

#[derive(Clone, Debug)]
pub struct WindowRefusal {
    pub window_index: usize,
    pub reason: RefusalReason,
}

/// Result of running recovery over a stream.
#[derive(Clone, Debug)]
pub struct RecoveryOutput<S: Scalar> {
    pub estimates: Vec<VelocityEstimate<S>>,
    pub refusals: Vec<WindowRefusal>,
}

/// Fuse a normalized stream with its saturation windows into per-sample
/// velocity estimates.
///
/// Outside windows every axis passes through as measured. Inside a window
/// a sample needs recovery only when its reading actually sits at the rail
/// (within the rig's rail band): detection windows are margin-widened, and
/// a reading demonstrably below the rail is a valid measurement. Samples
/// at the rail on exactly one axis are recovered per-sample, tracking the
/// rotation axis from each new fused estimate (or frozen at window entry
/// when `cfg.frozen_axis` is set). Samples railed on two or more axes
/// simultaneously are rejected, as are all rail samples of a window with
/// no prior rotation axis; the smoother bridges those spans.
pub fn recover_stream<S: Scalar>(
    samples: &[ImuSample<S>],
    windows: &[SaturationWindow],
    cfg: &RigConfig<S>,
) -> RecoveryOutput<S> {
    // Per-axis map sample index → window index.
    let mut window_at: [Vec<Option<usize>>; 3] = [
        vec![None; samples.len()],
        vec![None; samples.len()],
        vec![None; samples.len()],
    ];
    let mut refusals = Vec::new();
    let mut refused = vec![false; windows.len()];
    for (wi, w) in windows.iter().enumerate() {
        for i in w.sample_range.clone() {
            window_at[w.axis.index()][i] = Some(wi);
        }
        if w.sample_range.start == 0 {
            refused[wi] = true;
            refusals.push(WindowRefusal {
                window_index: wi,
                reason: RefusalReason::NoPriorAxis,
            });
        }
    }

    let tiny = cast::<S>(1e-9);
    let mut estimates: Vec<VelocityEstimate<S>> = Vec::with_capacity(samples.len());
    // Axis seed: last fused estimate with all axes usable.
    let mut last_valid: Option<Vector3<S>> = None;
    // Per-window frozen seed, captured at window entry.
    let mut seeds: Vec<Option<Vector3<S>>> = vec![None; windows.len()];
    let mut multi_axis_hit = vec![false; windows.len()];

    for (i, sample) in samples.iter().enumerate() {
        let mut omega = sample.gyro;
        let mut var = Vector3::repeat(cfg.gyro_noise_var);
        let mut source = [AxisSource::Measured; 3];

        // Axes whose reading is at the rail right now; in-window axes
        // below the rail band stay measured.
        let railed: Vec<(Axis, usize)> = Axis::ALL
            .into_iter()
            .filter_map(|axis| {
                let ai = axis.index();
                let wi = window_at[ai][i]?;
                let at_rail = sample.gyro[ai].abs() >= cfg.gyro_sat[ai] - cfg.rail_band();
                at_rail.then_some((axis, wi))
            })
            .collect();

        let single_axis = railed.len() == 1;
        for &(axis, wi) in &railed {
            let ai = axis.index();
            if !single_axis {
                // Assumption violated: two or more axes railed at once.
                if !multi_axis_hit[wi] {
                    multi_axis_hit[wi] = true;
                    refusals.push(WindowRefusal {
                        window_index: wi,
                        reason: RefusalReason::MultiAxisSaturation,
                    });
                }
                omega[ai] = S::from_f64(f64::NAN).unwrap();
                var[ai] = cfg.estimate_var;
                source[ai] = AxisSource::Rejected;
                continue;
            }
            if !refused[wi] && seeds[wi].is_none() {
                match last_valid {
                    Some(v) if v.norm() > tiny => seeds[wi] = Some(v),
                    _ => {
                        // No usable axis to seed from; refuse the window.
                        refused[wi] = true;
                        refusals.push(WindowRefusal {
                            window_index: wi,
                            reason: RefusalReason::NoPriorAxis,
                        });
                    }
                }
            }
            if refused[wi] {
                omega[ai] = S::from_f64(f64::NAN).unwrap();
                var[ai] = cfg.estimate_var;
                source[ai] = AxisSource::Rejected;
                continue;
            }
            let e_src = if cfg.frozen_axis {
                seeds[wi].expect("seed set above")
            } else {
                match last_valid {
                    Some(v) if v.norm() > tiny => v,
                    _ => seeds[wi].expect("seed set above"),
                }
            };
            let e_prev = e_src / e_src.norm();
            let recovery = match recover_axis(sample, axis, &e_prev, cfg) {
                Ok(r) => r,
                // A degenerate lever arm at this sample rejects it; the
                // smoother bridges.
                Err(_) => AxisRecovery::rejected(),
            };
            match recovery.value {
                Some(v) => {
                    omega[ai] = v;
                    var[ai] = cfg.estimate_var;
                    source[ai] = AxisSource::Recovered;
                }
                None => {
                    omega[ai] = S::from_f64(f64::NAN).unwrap();
                    var[ai] = cfg.estimate_var;
                    source[ai] = AxisSource::Rejected;
                }
            }
        }

        let estimate = VelocityEstimate {
            t: sample.t,
            omega,
            var,
            source,
        };
        if source.iter().all(|&s| s != AxisSource::Rejected) {
            last_valid = Some(omega);
        }
        estimates.push(estimate);
    }

    refusals.sort_by_key(|r| r.window_index);
    refusals.dedup_by_key(|r| r.window_index);
    RecoveryOutput {
        estimates,
        refusals,
    }
}
