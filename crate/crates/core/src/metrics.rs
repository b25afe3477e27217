//! Recovery-quality evaluation against ground truth.
//!
//! Errors are computed only inside saturation windows, on the saturated
//! axis (optionally on the full 3-vector norm), comparing the raw clipped
//! signal and the recovered/smoothed signal against truth. Outside the
//! windows both signals are the same measurements, so they carry no
//! information about the method.

use nalgebra::Vector3;

use crate::error::Error;
use crate::imu::WindowSpan;
use crate::scalar::{cast, Scalar};
use crate::sim::TruthSample;
use crate::smoother::SmoothedTrajectory;

/// One truth sample paired with an estimate value at (nearly) the same time.
#[derive(Clone, Copy, Debug)]
pub struct Pair<S: Scalar> {
    pub t: f64,
    pub truth: Vector3<S>,
    pub value: Vector3<S>,
}

/// Result of aligning a truth stream with an estimate source.
#[derive(Clone, Debug)]
pub struct PairedSeries<S: Scalar> {
    pub pairs: Vec<Pair<S>>,
    /// Truth samples with no usable counterpart.
    pub dropped: usize,
}

/// Pair truth samples with smoothed-trajectory queries at the truth
/// timestamps. Truth outside the trajectory span is dropped and counted.
pub fn align_truth_to_trajectory<S: Scalar>(
    truth: &[TruthSample<S>],
    traj: &SmoothedTrajectory<S>,
) -> Result<PairedSeries<S>, Error> {
    let mut pairs = Vec::new();
    let mut dropped = 0usize;
    for ts in truth {
        match traj.query(ts.t) {
            Ok((omega, _var)) => pairs.push(Pair {
                t: ts.t,
                truth: ts.omega,
                value: omega,
            }),
            Err(_) => dropped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(PairedSeries { pairs, dropped })
}

/// Pair truth samples with the nearest sample of a discrete stream, within
/// half the stream's median spacing. Unpaired truth samples are dropped
/// and counted.
pub fn align_truth_nearest<S: Scalar>(
    truth: &[TruthSample<S>],
    times: &[f64],
    values: &[Vector3<S>],
) -> Result<PairedSeries<S>, Error> {
    assert_eq!(times.len(), values.len());
    if times.is_empty() || truth.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let tol = median_spacing(times) / 2.0;
    let mut pairs = Vec::new();
    let mut dropped = 0usize;
    let mut j = 0usize;
    for ts in truth {
        while j + 1 < times.len() && (times[j + 1] - ts.t).abs() <= (times[j] - ts.t).abs() {
            j += 1;
        }
        if (times[j] - ts.t).abs() <= tol {
            pairs.push(Pair {
                t: ts.t,
                truth: ts.omega,
                value: values[j],
            });
        } else {
            dropped += 1;
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(PairedSeries { pairs, dropped })
}

fn median_spacing(times: &[f64]) -> f64 {
    if times.len() < 2 {
        return f64::INFINITY;
    }
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gaps[gaps.len() / 2]
}

/// Absolute errors of `pairs` restricted to the window spans: per pair and
/// containing window, the error on that window's axis (or the 3-vector
/// norm error when `vector_norm` is set). Non-finite errors (an estimate
/// with no usable value on the axis) are treated as missing and skipped.
pub fn window_errors<S: Scalar>(
    series: &PairedSeries<S>,
    windows: &[WindowSpan],
    vector_norm: bool,
) -> Vec<S> {
    let mut errors = Vec::new();
    for pair in &series.pairs {
        for w in windows {
            if w.contains_t(pair.t) {
                let e = if vector_norm {
                    (pair.value - pair.truth).norm()
                } else {
                    let i = w.axis.index();
                    (pair.value[i] - pair.truth[i]).abs()
                };
                if crate::scalar::is_finite(e) {
                    errors.push(e);
                }
            }
        }
    }
    errors
}

/// Order statistics of a set of absolute errors.
#[derive(Clone, Copy, Debug)]
pub struct ErrorStats<S: Scalar> {
    pub median: S,
    pub mean: S,
    pub p90: S,
    pub p99: S,
    pub max: S,
    pub count: usize,
}

impl<S: Scalar> ErrorStats<S> {
    /// Compute stats; `None` for an empty set.
    pub fn from_errors(errors: &[S]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let mut sorted = errors.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let mean = sorted.iter().copied().sum::<S>() / cast::<S>(n as f64);
        Some(ErrorStats {
            median: percentile(&sorted, 50.0),
            mean,
            p90: percentile(&sorted, 90.0),
            p99: percentile(&sorted, 99.0),
            max: sorted[n - 1],
            count: n,
        })
    }
}

/// Linear-interpolated percentile of an ascending-sorted slice.
pub fn percentile<S: Scalar>(sorted: &[S], p: f64) -> S {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = (p / 100.0) * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = cast::<S>(rank - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// In-window error samples of one run, raw vs recovered/smoothed.
#[derive(Clone, Debug)]
pub struct RunErrors<S: Scalar> {
    pub raw: Vec<S>,
    pub recovered: Vec<S>,
}

impl<S: Scalar> Default for RunErrors<S> {
    fn default() -> Self {
        Self {
            raw: Vec::new(),
            recovered: Vec::new(),
        }
    }
}

/// Per-run (or aggregate) error report.
#[derive(Clone, Debug)]
pub struct RunReport<S: Scalar> {
    pub label: String,
    pub raw: ErrorStats<S>,
    pub recovered: ErrorStats<S>,
    /// `100·(1 − median_recovered / median_raw)`.
    pub reduction_pct: S,
}

/// Median-based error reduction in percent; 0 when the raw median is 0.
pub fn median_reduction_pct<S: Scalar>(raw_median: S, recovered_median: S) -> S {
    if raw_median <= S::zero() {
        S::zero()
    } else {
        cast::<S>(100.0) * (S::one() - recovered_median / raw_median)
    }
}

/// Build the report for one run from its in-window errors.
///
/// Errors with `NoSaturatedSamples` when either side is empty.
pub fn saturation_error_stats<S: Scalar>(
    label: impl Into<String>,
    errors: &RunErrors<S>,
) -> Result<RunReport<S>, Error> {
    let raw = ErrorStats::from_errors(&errors.raw).ok_or(Error::NoSaturatedSamples)?;
    let recovered = ErrorStats::from_errors(&errors.recovered).ok_or(Error::NoSaturatedSamples)?;
    Ok(RunReport {
        label: label.into(),
        raw,
        recovered,
        reduction_pct: median_reduction_pct(raw.median, recovered.median),
    })
}

/// Aggregate over runs, reporting both pooling conventions: `pooled`
/// concatenates all in-window error samples before taking statistics;
/// `per_run_median` takes statistics over the per-run medians.
#[derive(Clone, Debug)]
pub struct BatchReport<S: Scalar> {
    pub runs: Vec<RunReport<S>>,
    pub pooled: RunReport<S>,
    pub per_run_median: RunReport<S>,
}

pub fn aggregate_batch<S: Scalar>(
    runs: &[(String, RunErrors<S>)],
) -> Result<BatchReport<S>, Error> {
    let with_samples: Vec<&(String, RunErrors<S>)> = runs
        .iter()
        .filter(|(_, e)| !e.raw.is_empty() && !e.recovered.is_empty())
        .collect();
    if with_samples.is_empty() {
        return Err(Error::NoSaturatedSamples);
    }

    let mut reports = Vec::new();
    let mut pooled = RunErrors::default();
    let mut raw_medians = Vec::new();
    let mut rec_medians = Vec::new();
    for (label, errors) in &with_samples {
        let report = saturation_error_stats(label.clone(), errors)?;
        raw_medians.push(report.raw.median);
        rec_medians.push(report.recovered.median);
        reports.push(report);
        pooled.raw.extend_from_slice(&errors.raw);
        pooled.recovered.extend_from_slice(&errors.recovered);
    }

    let pooled_report = saturation_error_stats("pooled", &pooled)?;
    let per_run = RunErrors {
        raw: raw_medians,
        recovered: rec_medians,
    };
    let per_run_report = saturation_error_stats("per_run_median", &per_run)?;

    Ok(BatchReport {
        runs: reports,
        pooled: pooled_report,
        per_run_median: per_run_report,
    })
}
