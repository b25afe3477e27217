//! IMU domain types, stream normalization, and saturation-window detection.
//!
//! Conventions: body-frame right-handed axes, timestamps in seconds relative
//! to stream start, angular rates in rad/s, proper acceleration in m/s².

use std::fmt;
use std::ops::Range;

use nalgebra::Vector3;

use crate::error::Error;
use crate::scalar::{cast, is_finite, Scalar};

/// Gyroscope/accelerometer axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Self::ALL[i]
    }

    /// The two axes other than `self`, in cyclic order.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::Z, Axis::X],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s.trim() {
            "x" | "X" | "0" => Some(Axis::X),
            "y" | "Y" | "1" => Some(Axis::Y),
            "z" | "Z" | "2" => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// One timestamped gyroscope + accelerometer reading in the body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample<S: Scalar> {
    /// Seconds relative to stream start.
    pub t: f64,
    /// Angular rate, rad/s.
    pub gyro: Vector3<S>,
    /// Proper acceleration, m/s².
    pub accel: Vector3<S>,
}

impl<S: Scalar> ImuSample<S> {
    pub fn new(t: f64, gyro: Vector3<S>, accel: Vector3<S>) -> Self {
        Self { t, gyro, accel }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.gyro.iter().all(|&v| is_finite(v))
            && self.accel.iter().all(|&v| is_finite(v))
    }
}

/// Per-axis provenance of an angular-velocity value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisSource {
    /// Straight from an unsaturated gyro reading.
    Measured,
    /// Reconstructed from the centripetal acceleration.
    Recovered,
    /// No usable value on this axis; treat as missing downstream.
    Rejected,
    /// Posterior of the motion-prior smoother.
    Smoothed,
}

impl AxisSource {
    pub fn parse(s: &str) -> Option<AxisSource> {
        match s.trim() {
            "measured" => Some(AxisSource::Measured),
            "recovered" => Some(AxisSource::Recovered),
            "rejected" => Some(AxisSource::Rejected),
            "smoothed" => Some(AxisSource::Smoothed),
            _ => None,
        }
    }
}

impl fmt::Display for AxisSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxisSource::Measured => "measured",
            AxisSource::Recovered => "recovered",
            AxisSource::Rejected => "rejected",
            AxisSource::Smoothed => "smoothed",
        })
    }
}

/// Fused angular velocity with per-axis variance and provenance.
///
/// An axis tagged [`AxisSource::Rejected`] carries no usable `omega`
/// component (it is set to NaN so accidental use is caught).
#[derive(Clone, Copy, Debug)]
pub struct VelocityEstimate<S: Scalar> {
    pub t: f64,
    pub omega: Vector3<S>,
    /// Per-axis variance, (rad/s)².
    pub var: Vector3<S>,
    pub source: [AxisSource; 3],
}

impl<S: Scalar> VelocityEstimate<S> {
    /// Passthrough of a raw measurement: all axes measured with the
    /// gyro noise variance.
    pub fn from_measurement(sample: &ImuSample<S>, gyro_noise_var: S) -> Self {
        Self {
            t: sample.t,
            omega: sample.gyro,
            var: Vector3::repeat(gyro_noise_var),
            source: [AxisSource::Measured; 3],
        }
    }

    /// True when the axis carries a usable value.
    pub fn has_value(&self, axis: Axis) -> bool {
        self.source[axis.index()] != AxisSource::Rejected
    }
}

/// Rig geometry, sensor thresholds, and estimator/smoother constants.
#[derive(Clone, Debug)]
pub struct RigConfig<S: Scalar> {
    /// COM → IMU offset, meters, body frame.
    pub com_to_imu: Vector3<S>,
    /// Per-axis gyro saturation threshold, rad/s (positive).
    pub gyro_sat: Vector3<S>,
    /// Gyro measurement noise variance, (rad/s)².
    pub gyro_noise_var: S,
    /// Variance assigned to recovered angular-speed estimates, (rad/s)².
    pub estimate_var: S,
    /// Power spectral density of angular jerk for the motion prior.
    pub jerk_psd: S,
    /// Detection margin below the saturation threshold, rad/s.
    pub sat_margin: S,
    /// Minimum usable lever arm, meters.
    pub r_min: S,
    /// Freeze the rotation axis at window entry instead of tracking
    /// it per-sample through the window.
    pub frozen_axis: bool,
    /// Accelerometer rail, m/s²; samples with any axis at the rail are
    /// rejected for recovery. `None` disables the check.
    pub accel_rail: Option<S>,
    /// Width of the band below `gyro_sat` within which a reading is
    /// treated as actually clipped. Detection windows are margin-widened;
    /// an in-window reading below this band is a valid measurement.
    /// `None` derives the band from the gyro noise (4σ).
    pub gyro_rail_band: Option<S>,
}

impl<S: Scalar> RigConfig<S> {
    /// Configuration with the stock sensor constants; the saturation
    /// threshold and noise figures match a unit saturating at 10.5 rad/s.
    pub fn new(com_to_imu: Vector3<S>) -> Self {
        let sat = cast::<S>(10.5);
        Self {
            com_to_imu,
            gyro_sat: Vector3::repeat(sat),
            gyro_noise_var: cast(2.74e-5),
            estimate_var: cast(3.65),
            jerk_psd: cast(1e6),
            // Clipping plateaus jitter slightly below the rail, so the
            // detector keeps a 2% margin.
            sat_margin: sat * cast(0.02),
            r_min: cast(0.01),
            frozen_axis: false,
            accel_rail: None,
            gyro_rail_band: None,
        }
    }

    /// Lowest magnitude a recovered value may take on `axis`.
    #[inline]
    pub fn saturation_floor(&self, axis: Axis) -> S {
        self.gyro_sat[axis.index()] - self.sat_margin
    }

    /// Band below the rail within which a reading counts as clipped.
    #[inline]
    pub fn rail_band(&self) -> S {
        self.gyro_rail_band
            .unwrap_or_else(|| self.gyro_noise_var.sqrt() * cast(4.0))
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !self.com_to_imu.iter().all(|&v| is_finite(v)) {
            return bad("com_to_imu must be finite");
        }
        if self.com_to_imu.norm() <= S::zero() {
            return bad("com_to_imu must be nonzero: an IMU at the COM cannot observe rotation");
        }
        if !self.gyro_sat.iter().all(|&v| is_finite(v) && v > S::zero()) {
            return bad("gyro_sat must be positive on every axis");
        }
        for &v in &[self.gyro_noise_var, self.estimate_var, self.jerk_psd] {
            if !is_finite(v) || v <= S::zero() {
                return bad("variances and jerk_psd must be positive");
            }
        }
        let min_sat = self
            .gyro_sat
            .iter()
            .fold(S::max_value().unwrap(), |a, &b| a.min(b));
        if !is_finite(self.sat_margin) || self.sat_margin < S::zero() || self.sat_margin >= min_sat
        {
            return bad("sat_margin must satisfy 0 <= margin < min(gyro_sat)");
        }
        if !is_finite(self.r_min) || self.r_min < S::zero() {
            return bad("r_min must be non-negative");
        }
        if let Some(rail) = self.accel_rail {
            if !is_finite(rail) || rail <= S::zero() {
                return bad("accel_rail must be positive when set");
            }
        }
        if let Some(band) = self.gyro_rail_band {
            if !is_finite(band) || band < S::zero() || band >= min_sat {
                return bad("gyro_rail_band must satisfy 0 <= band < min(gyro_sat)");
            }
        }
        Ok(())
    }
}

impl<S: Scalar> Default for RigConfig<S> {
    fn default() -> Self {
        // Example rig geometry: IMU mounted off-center on all three axes.
        Self::new(Vector3::new(cast(0.05), cast(0.12), cast(0.03)))
    }
}

/// A maximal contiguous run of samples saturated on one gyro axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SaturationWindow {
    pub axis: Axis,
    pub t_start: f64,
    pub t_end: f64,
    /// Index span into the normalized stream (half-open).
    pub sample_range: Range<usize>,
    /// Set when this window overlaps a window on another axis; the
    /// estimator refuses such windows and leaves them to the smoother.
    pub multi_axis: bool,
}

impl SaturationWindow {
    pub fn contains_t(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }
}

/// Lightweight window span as stored in the windows CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSpan {
    pub axis: Axis,
    pub t_start: f64,
    pub t_end: f64,
}

impl WindowSpan {
    pub fn contains_t(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }
}

impl From<&SaturationWindow> for WindowSpan {
    fn from(w: &SaturationWindow) -> Self {
        WindowSpan {
            axis: w.axis,
            t_start: w.t_start,
            t_end: w.t_end,
        }
    }
}

/// Sort a raw stream by time, collapse duplicate timestamps keeping the
/// last sample, and verify finiteness.
///
/// Returns an error for an empty stream or any non-finite field; the error
/// index refers to the input ordering.
pub fn normalize_stream<S: Scalar>(samples: Vec<ImuSample<S>>) -> Result<Vec<ImuSample<S>>, Error> {
    if samples.is_empty() {
        return Err(Error::EmptyStream);
    }
    for (index, s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFiniteSample { index });
        }
    }
    let mut sorted = samples;
    // Stable sort keeps input order among equal timestamps, so "keep the
    // last duplicate" below is well defined.
    sorted.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite timestamps"));
    let mut out: Vec<ImuSample<S>> = Vec::with_capacity(sorted.len());
    for s in sorted {
        match out.last_mut() {
            Some(last) if last.t == s.t => *last = s,
            _ => out.push(s),
        }
    }
    Ok(out)
}

/// Detect maximal saturation windows per axis over a normalized stream.
///
/// A sample is saturated on an axis when `|gyro| >= gyro_sat - sat_margin`.
/// Windows on different axes that overlap in samples are flagged
/// `multi_axis`; they are still reported so the caller can refuse them.
pub fn detect_saturation<S: Scalar>(
    samples: &[ImuSample<S>],
    cfg: &RigConfig<S>,
) -> Vec<SaturationWindow> {
    let mut windows: Vec<SaturationWindow> = Vec::new();
    for axis in Axis::ALL {
        let floor = cfg.saturation_floor(axis);
        let mut start: Option<usize> = None;
        for (i, s) in samples.iter().enumerate() {
            let hit = s.gyro[axis.index()].abs() >= floor;
            match (hit, start) {
                (true, None) => start = Some(i),
                (false, Some(s0)) => {
                    windows.push(make_window(samples, axis, s0..i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s0) = start {
            windows.push(make_window(samples, axis, s0..samples.len()));
        }
    }
    // Flag overlapping windows across axes.
    for i in 0..windows.len() {
        for j in (i + 1)..windows.len() {
            if windows[i].axis != windows[j].axis
                && ranges_overlap(&windows[i].sample_range, &windows[j].sample_range)
            {
                windows[i].multi_axis = true;
                windows[j].multi_axis = true;
            }
        }
    }
    windows.sort_by_key(|w| (w.sample_range.start, w.axis.index()));
    windows
}

fn make_window<S: Scalar>(
    samples: &[ImuSample<S>],
    axis: Axis,
    range: Range<usize>,
) -> SaturationWindow {
    SaturationWindow {
        axis,
        t_start: samples[range.start].t,
        t_end: samples[range.end - 1].t,
        sample_range: range,
        multi_axis: false,
    }
}

fn ranges_overlap(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.start < b.end && b.start < a.end
}

/// Convenience for tests and diagnostics: total in-window sample count
/// on a given axis.
pub fn saturated_sample_count(windows: &[SaturationWindow], axis: Axis) -> usize {
    windows
        .iter()
        .filter(|w| w.axis == axis)
        .map(|w| w.sample_range.len())
        .sum()
}
