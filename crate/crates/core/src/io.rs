//! File formats: CSV schemas for measurements, truth, estimates, windows,
//! reports and plot data, plus atomic file writes.
//!
//! All CSVs are comma-separated with a required header and `.` decimals;
//! lines starting with `#` are ignored. Timestamps are seconds relative to
//! stream start.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::Error;
use crate::imu::{Axis, AxisSource, ImuSample, VelocityEstimate, WindowSpan};
use crate::metrics::{BatchReport, ErrorStats, RunReport};
use crate::scalar::{cast, to_f64, Scalar};
use crate::sim::TruthSample;

pub const MEASUREMENTS_HEADER: &str = "t,gx,gy,gz,ax,ay,az";
pub const TRUTH_HEADER: &str = "t,wx,wy,wz";
pub const ESTIMATES_HEADER: &str = "t,wx,wy,wz,var_x,var_y,var_z,src_x,src_y,src_z";
pub const WINDOWS_HEADER: &str = "axis,t_start,t_end";
pub const REPORT_HEADER: &str = "run,stat,raw,recovered,reduction_pct";
pub const PLOT_HEADER: &str = "t,truth,raw,smoothed,sigma3";

/// Write a file atomically: write to a sibling temp file, then rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), Error> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct CsvReader<'a> {
    path: String,
    /// (1-based line number, content) of data lines.
    lines: Vec<(usize, &'a str)>,
}

impl<'a> CsvReader<'a> {
    fn parse(text: &'a str, path: &Path, header: &str) -> Result<Self, Error> {
        let path_s = path.display().to_string();
        let mut lines = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != header {
                    return Err(Error::Parse {
                        path: path_s,
                        line: i + 1,
                        msg: format!("expected header `{header}`, got `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            lines.push((i + 1, line));
        }
        if !header_seen {
            return Err(Error::Parse {
                path: path_s,
                line: 1,
                msg: format!("missing header `{header}`"),
            });
        }
        Ok(Self {
            path: path_s,
            lines,
        })
    }

    fn error(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn fields(&self, line: usize, content: &str, expected: usize) -> Result<Vec<String>, Error> {
        let fields: Vec<String> = content.split(',').map(|f| f.trim().to_string()).collect();
        if fields.len() != expected {
            return Err(self.error(
                line,
                format!("expected {} fields, got {}", expected, fields.len()),
            ));
        }
        Ok(fields)
    }

    fn number(&self, line: usize, field: &str, name: &str) -> Result<f64, Error> {
        field
            .parse::<f64>()
            .map_err(|_| self.error(line, format!("invalid number for {name}: `{field}`")))
    }

    fn finite_number(&self, line: usize, field: &str, name: &str) -> Result<f64, Error> {
        let v = self.number(line, field, name)?;
        if !v.is_finite() {
            return Err(self.error(line, format!("non-finite value for {name}: `{field}`")));
        }
        Ok(v)
    }
}

fn fmt_scalar<S: Scalar>(v: S) -> String {
    format!("{}", to_f64(v))
}

pub fn read_measurements<S: Scalar>(path: &Path) -> Result<Vec<ImuSample<S>>, Error> {
    let text = fs::read_to_string(path)?;
    let reader = CsvReader::parse(&text, path, MEASUREMENTS_HEADER)?;
    let mut out = Vec::with_capacity(reader.lines.len());
    for &(line, content) in &reader.lines {
        let f = reader.fields(line, content, 7)?;
        let t = reader.finite_number(line, &f[0], "t")?;
        let mut vals = [0.0f64; 6];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = reader.finite_number(
                line,
                &f[i + 1],
                MEASUREMENTS_HEADER.split(',').nth(i + 1).unwrap(),
            )?;
        }
        out.push(ImuSample::new(
            t,
            Vector3::new(cast(vals[0]), cast(vals[1]), cast(vals[2])),
            Vector3::new(cast(vals[3]), cast(vals[4]), cast(vals[5])),
        ));
    }
    Ok(out)
}

pub fn write_measurements<S: Scalar>(path: &Path, samples: &[ImuSample<S>]) -> Result<(), Error> {
    let mut s = String::new();
    let _ = writeln!(s, "{MEASUREMENTS_HEADER}");
    for m in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.t,
            fmt_scalar(m.gyro.x),
            fmt_scalar(m.gyro.y),
            fmt_scalar(m.gyro.z),
            fmt_scalar(m.accel.x),
            fmt_scalar(m.accel.y),
            fmt_scalar(m.accel.z),
        );
    }
    atomic_write(path, &s)
}

pub fn read_truth<S: Scalar>(path: &Path) -> Result<Vec<TruthSample<S>>, Error> {
    let text = fs::read_to_string(path)?;
    let reader = CsvReader::parse(&text, path, TRUTH_HEADER)?;
    let mut out = Vec::with_capacity(reader.lines.len());
    for &(line, content) in &reader.lines {
        let f = reader.fields(line, content, 4)?;
        let t = reader.finite_number(line, &f[0], "t")?;
        let wx = reader.finite_number(line, &f[1], "wx")?;
        let wy = reader.finite_number(line, &f[2], "wy")?;
        let wz = reader.finite_number(line, &f[3], "wz")?;
        out.push(TruthSample {
            t,
            omega: Vector3::new(cast(wx), cast(wy), cast(wz)),
        });
    }
    Ok(out)
}

pub fn write_truth<S: Scalar>(path: &Path, truth: &[TruthSample<S>]) -> Result<(), Error> {
    let mut s = String::new();
    let _ = writeln!(s, "{TRUTH_HEADER}");
    for t in truth {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            t.t,
            fmt_scalar(t.omega.x),
            fmt_scalar(t.omega.y),
            fmt_scalar(t.omega.z),
        );
    }
    atomic_write(path, &s)
}

pub fn read_estimates<S: Scalar>(path: &Path) -> Result<Vec<VelocityEstimate<S>>, Error> {
    let text = fs::read_to_string(path)?;
    let reader = CsvReader::parse(&text, path, ESTIMATES_HEADER)?;
    let mut out = Vec::with_capacity(reader.lines.len());
    for &(line, content) in &reader.lines {
        let f = reader.fields(line, content, 10)?;
        let t = reader.finite_number(line, &f[0], "t")?;
        let mut source = [AxisSource::Measured; 3];
        for (i, src) in source.iter_mut().enumerate() {
            *src = AxisSource::parse(&f[7 + i])
                .ok_or_else(|| reader.error(line, format!("invalid source tag `{}`", f[7 + i])))?;
        }
        let mut omega = Vector3::zeros();
        let mut var = Vector3::zeros();
        for i in 0..3 {
            // Rejected axes may carry NaN; other axes must be finite.
            let w = reader.number(line, &f[1 + i], "w")?;
            if source[i] != AxisSource::Rejected && !w.is_finite() {
                return Err(reader.error(line, format!("non-finite value for w: `{}`", f[1 + i])));
            }
            omega[i] = cast(w);
            let v = reader.finite_number(line, &f[4 + i], "var")?;
            if v <= 0.0 {
                return Err(reader.error(line, format!("variance must be positive, got `{v}`")));
            }
            var[i] = cast(v);
        }
        out.push(VelocityEstimate {
            t,
            omega,
            var,
            source,
        });
    }
    Ok(out)
}

pub fn write_estimates<S: Scalar>(
    path: &Path,
    estimates: &[VelocityEstimate<S>],
) -> Result<(), Error> {
    let mut s = String::new();
    let _ = writeln!(s, "{ESTIMATES_HEADER}");
    for e in estimates {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            e.t,
            fmt_scalar(e.omega.x),
            fmt_scalar(e.omega.y),
            fmt_scalar(e.omega.z),
            fmt_scalar(e.var.x),
            fmt_scalar(e.var.y),
            fmt_scalar(e.var.z),
            e.source[0],
            e.source[1],
            e.source[2],
        );
    }
    atomic_write(path, &s)
}

pub fn read_windows(path: &Path) -> Result<Vec<WindowSpan>, Error> {
    let text = fs::read_to_string(path)?;
    let reader = CsvReader::parse(&text, path, WINDOWS_HEADER)?;
    let mut out = Vec::with_capacity(reader.lines.len());
    for &(line, content) in &reader.lines {
        let f = reader.fields(line, content, 3)?;
        let axis = Axis::parse(&f[0])
            .ok_or_else(|| reader.error(line, format!("invalid axis `{}`", f[0])))?;
        let t_start = reader.finite_number(line, &f[1], "t_start")?;
        let t_end = reader.finite_number(line, &f[2], "t_end")?;
        if t_end < t_start {
            return Err(reader.error(line, "t_end before t_start"));
        }
        out.push(WindowSpan {
            axis,
            t_start,
            t_end,
        });
    }
    Ok(out)
}

pub fn write_windows(path: &Path, windows: &[WindowSpan]) -> Result<(), Error> {
    let mut s = String::new();
    let _ = writeln!(s, "{WINDOWS_HEADER}");
    for w in windows {
        let _ = writeln!(s, "{},{},{}", w.axis, w.t_start, w.t_end);
    }
    atomic_write(path, &s)
}

type StatAccessor<S> = fn(&ErrorStats<S>) -> S;

fn push_report_rows<S: Scalar>(s: &mut String, report: &RunReport<S>) {
    let stat_rows: [(&str, StatAccessor<S>); 5] = [
        ("median", |st| st.median),
        ("mean", |st| st.mean),
        ("p90", |st| st.p90),
        ("p99", |st| st.p99),
        ("max", |st| st.max),
    ];
    for (name, get) in stat_rows {
        let reduction = if name == "median" {
            fmt_scalar(report.reduction_pct)
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            report.label,
            name,
            fmt_scalar(get(&report.raw)),
            fmt_scalar(get(&report.recovered)),
            reduction,
        );
    }
    let _ = writeln!(
        s,
        "{},count,{},{},",
        report.label, report.raw.count, report.recovered.count
    );
}

pub fn write_report_csv<S: Scalar>(path: &Path, report: &BatchReport<S>) -> Result<(), Error> {
    let mut s = String::new();
    let _ = writeln!(s, "{REPORT_HEADER}");
    for run in &report.runs {
        push_report_rows(&mut s, run);
    }
    push_report_rows(&mut s, &report.pooled);
    push_report_rows(&mut s, &report.per_run_median);
    atomic_write(path, &s)
}

/// Which aggregate the text report leads with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolingMode {
    Pooled,
    PerRunMedian,
}

pub fn write_report_text<S: Scalar>(
    path: &Path,
    report: &BatchReport<S>,
    mode: PoolingMode,
) -> Result<(), Error> {
    let mut s = String::new();
    let headline = match mode {
        PoolingMode::Pooled => &report.pooled,
        PoolingMode::PerRunMedian => &report.per_run_median,
    };
    let _ = writeln!(
        s,
        "saturated-axis angular velocity error ({})",
        match mode {
            PoolingMode::Pooled => "pooled over all runs",
            PoolingMode::PerRunMedian => "median of per-run medians",
        }
    );
    let _ = writeln!(
        s,
        "  raw median {:.6} rad/s -> recovered median {:.6} rad/s  (reduction {:.1}%)",
        to_f64(headline.raw.median),
        to_f64(headline.recovered.median),
        to_f64(headline.reduction_pct),
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<16} {:>12} {:>12} {:>12} {:>12} {:>12} {:>8}",
        "run", "raw_med", "rec_med", "raw_p99", "rec_p99", "reduction%", "samples"
    );
    for run in report
        .runs
        .iter()
        .chain([&report.pooled, &report.per_run_median])
    {
        let _ = writeln!(
            s,
            "{:<16} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.1} {:>8}",
            run.label,
            to_f64(run.raw.median),
            to_f64(run.recovered.median),
            to_f64(run.raw.p99),
            to_f64(run.recovered.p99),
            to_f64(run.reduction_pct),
            run.raw.count,
        );
    }
    atomic_write(path, &s)
}

/// One row of the plot-data series for the dominant saturated axis.
#[derive(Clone, Copy, Debug)]
pub struct PlotRow<S: Scalar> {
    pub t: f64,
    pub truth: S,
    pub raw: S,
    pub smoothed: S,
    /// Three standard deviations of the smoothed value.
    pub sigma3: S,
}

pub fn write_plot_series<S: Scalar>(
    path: &Path,
    axis: Axis,
    rows: &[PlotRow<S>],
) -> Result<(), Error> {
    let mut s = String::new();
    let _ = writeln!(s, "# axis={axis}");
    let _ = writeln!(s, "{PLOT_HEADER}");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.t,
            fmt_scalar(r.truth),
            fmt_scalar(r.raw),
            fmt_scalar(r.smoothed),
            fmt_scalar(r.sigma3),
        );
    }
    atomic_write(path, &s)
}
