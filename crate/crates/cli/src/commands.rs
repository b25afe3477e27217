//! Subcommand implementations. Everything runs on `f64` and goes through
//! the documented CSV schemas; output files are written atomically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gyrosat::config::{rig_from_kv, seed_from_kv, tumble_from_kv, KvFile};
use gyrosat::freefall::RefusalReason;
use gyrosat::imu::{Axis, RigConfig, VelocityEstimate, WindowSpan};
use gyrosat::io;
use gyrosat::io::PoolingMode;
use gyrosat::metrics::{
    aggregate_batch, align_truth_nearest, window_errors, PairedSeries, RunErrors,
};
use gyrosat::pipeline;
use gyrosat::sim::{run_scenario, tumble_scenario, TruthSample, TumbleConfig};
use nalgebra::Vector3;

use crate::{BatchArgs, CliError, EstimateArgs, EvaluateArgs, SimulateArgs};

/// Everything a run needs to be reproduced, written alongside its outputs.
struct RunManifest {
    command: String,
    config: Option<PathBuf>,
    seed: Option<u64>,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<PathBuf>,
    flags: Vec<String>,
}

impl RunManifest {
    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        match &self.config {
            Some(p) => {
                let _ = writeln!(s, "config = {}", p.display());
            }
            None => {
                let _ = writeln!(s, "config = (defaults)");
            }
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        for (name, path) in &self.inputs {
            let _ = writeln!(s, "input_{name} = {}", path.display());
        }
        for path in &self.outputs {
            let _ = writeln!(s, "output = {}", path.display());
        }
        for flag in &self.flags {
            let _ = writeln!(s, "flag = {flag}");
        }
        io::atomic_write(&dir.join("manifest.txt"), &s).map_err(CliError::from)
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "missing {what} file: {}",
            path.display()
        )));
    }
    Ok(())
}

fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

fn load_config(path: Option<&PathBuf>) -> Result<Option<KvFile>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => {
            require_file(p, "config")?;
            Ok(Some(KvFile::load(p)?))
        }
    }
}

fn rig_from_config(kv: Option<&KvFile>, frozen_axis: bool) -> Result<RigConfig<f64>, CliError> {
    let mut rig = match kv {
        Some(kv) => rig_from_kv::<f64>(kv)?,
        None => RigConfig::<f64>::default(),
    };
    if frozen_axis {
        rig.frozen_axis = true;
    }
    Ok(rig)
}

fn simulate_into(
    dir: &Path,
    kv: Option<&KvFile>,
    config_path: Option<&PathBuf>,
    seed: u64,
) -> Result<(), CliError> {
    let tumble = match kv {
        Some(kv) => tumble_from_kv::<f64>(kv)?,
        None => TumbleConfig::default(),
    };
    let scenario = tumble_scenario(seed, &tumble)?;
    let run = run_scenario(&scenario)?;
    ensure_out_dir(dir)?;
    let meas_path = dir.join("measurements.csv");
    let truth_path = dir.join("truth.csv");
    io::write_measurements(&meas_path, &run.measurements)?;
    io::write_truth(&truth_path, &run.truth)?;
    RunManifest {
        command: "simulate".to_string(),
        config: config_path.cloned(),
        seed: Some(seed),
        inputs: vec![],
        outputs: vec![meas_path, truth_path],
        flags: vec![],
    }
    .write(dir)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let kv = load_config(args.config.as_ref())?;
    let seed = match args.seed {
        Some(s) => s,
        None => seed_from_kv(kv.as_ref().unwrap_or(&KvFile::parse("", "")?))?.unwrap_or(0),
    };
    simulate_into(&args.out, kv.as_ref(), args.config.as_ref(), seed)
}

fn estimate_into(
    dir: &Path,
    measurements: &Path,
    rig: &RigConfig<f64>,
    config_path: Option<&PathBuf>,
) -> Result<(), CliError> {
    let samples = io::read_measurements::<f64>(measurements)?;
    let out = pipeline::estimate(samples, rig)?;

    for refusal in &out.recovery.refusals {
        let w = &out.windows[refusal.window_index];
        let why = match refusal.reason {
            RefusalReason::NoPriorAxis => "no prior rotation axis",
            RefusalReason::MultiAxisSaturation => "multiple axes saturated at once",
        };
        eprintln!(
            "note: window on {} [{:.3}, {:.3}] s left to the smoother: {why}",
            w.axis, w.t_start, w.t_end
        );
    }

    // Output rows carry the smoothed posterior with the pre-smoothing
    // provenance per axis, so consumers can see where recovery happened.
    let smoothed = out.trajectory.to_estimates();
    let rows: Vec<VelocityEstimate<f64>> = smoothed
        .iter()
        .zip(&out.recovery.estimates)
        .map(|(s, r)| VelocityEstimate {
            source: r.source,
            ..*s
        })
        .collect();

    ensure_out_dir(dir)?;
    let est_path = dir.join("estimates.csv");
    let win_path = dir.join("windows.csv");
    let spans: Vec<WindowSpan> = out.windows.iter().map(WindowSpan::from).collect();
    io::write_estimates(&est_path, &rows)?;
    io::write_windows(&win_path, &spans)?;
    RunManifest {
        command: "estimate".to_string(),
        config: config_path.cloned(),
        seed: None,
        inputs: vec![("measurements".to_string(), measurements.to_path_buf())],
        outputs: vec![est_path, win_path],
        flags: if rig.frozen_axis {
            vec!["frozen_axis".to_string()]
        } else {
            vec![]
        },
    }
    .write(dir)
}

pub fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    require_file(&args.measurements, "measurements")?;
    let kv = load_config(args.config.as_ref())?;
    let rig = rig_from_config(kv.as_ref(), args.frozen_axis)?;
    estimate_into(&args.out, &args.measurements, &rig, args.config.as_ref())
}

/// Estimates read either from a real estimates CSV or, for raw-only
/// evaluation, from a measurements CSV (gyro readings as values).
fn read_estimates_or_measurements(path: &Path) -> Result<Vec<VelocityEstimate<f64>>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if header == io::MEASUREMENTS_HEADER {
        let samples = io::read_measurements::<f64>(path)?;
        Ok(samples
            .iter()
            .map(|s| VelocityEstimate::from_measurement(s, 1.0))
            .collect())
    } else {
        io::read_estimates::<f64>(path).map_err(CliError::from)
    }
}

struct EvalInputs {
    label: String,
    truth: Vec<TruthSample<f64>>,
    windows: Vec<WindowSpan>,
    raw_values: Vec<(f64, Vector3<f64>)>,
    est: Vec<VelocityEstimate<f64>>,
}

fn pair_values(
    truth: &[TruthSample<f64>],
    series: &[(f64, Vector3<f64>)],
) -> Result<PairedSeries<f64>, CliError> {
    let times: Vec<f64> = series.iter().map(|(t, _)| *t).collect();
    let values: Vec<Vector3<f64>> = series.iter().map(|(_, v)| *v).collect();
    align_truth_nearest(truth, &times, &values).map_err(CliError::from)
}

fn eval_one(inputs: &EvalInputs, vector_norm: bool) -> Result<(String, RunErrors<f64>), CliError> {
    let raw_pairs = pair_values(&inputs.truth, &inputs.raw_values)?;
    let est_series: Vec<(f64, Vector3<f64>)> = inputs.est.iter().map(|e| (e.t, e.omega)).collect();
    let est_pairs = pair_values(&inputs.truth, &est_series)?;
    Ok((
        inputs.label.clone(),
        RunErrors {
            raw: window_errors(&raw_pairs, &inputs.windows, vector_norm),
            recovered: window_errors(&est_pairs, &inputs.windows, vector_norm),
        },
    ))
}

fn load_eval_inputs(
    label: String,
    estimates: &Path,
    truth: &Path,
    windows: &Path,
    measurements: Option<&PathBuf>,
) -> Result<EvalInputs, CliError> {
    let est = read_estimates_or_measurements(estimates)?;
    let truth = io::read_truth::<f64>(truth)?;
    let windows = io::read_windows(windows)?;
    let raw_values: Vec<(f64, Vector3<f64>)> = match measurements {
        Some(p) => io::read_measurements::<f64>(p)?
            .iter()
            .map(|s| (s.t, s.gyro))
            .collect(),
        None => est.iter().map(|e| (e.t, e.omega)).collect(),
    };
    Ok(EvalInputs {
        label,
        truth,
        windows,
        raw_values,
        est,
    })
}

/// Axis with the largest total window duration; plot data follows it.
fn dominant_axis(windows: &[WindowSpan]) -> Option<Axis> {
    let mut totals = [0.0f64; 3];
    for w in windows {
        totals[w.axis.index()] += w.t_end - w.t_start;
    }
    let best = (0..3).max_by(|&a, &b| totals[a].partial_cmp(&totals[b]).unwrap())?;
    (totals[best] > 0.0).then(|| Axis::from_index(best))
}

fn write_plot(inputs: &EvalInputs, path: &Path) -> Result<(), CliError> {
    let Some(axis) = dominant_axis(&inputs.windows) else {
        eprintln!("note: no saturation windows, skipping plot data");
        return Ok(());
    };
    let ai = axis.index();
    let raw_pairs = pair_values(&inputs.truth, &inputs.raw_values)?;
    let est_series: Vec<(f64, Vector3<f64>)> = inputs.est.iter().map(|e| (e.t, e.omega)).collect();
    let est_pairs = pair_values(&inputs.truth, &est_series)?;
    let var_series: Vec<(f64, Vector3<f64>)> = inputs.est.iter().map(|e| (e.t, e.var)).collect();
    let var_pairs = pair_values(&inputs.truth, &var_series)?;
    let mut rows = Vec::new();
    for ((rp, ep), vp) in raw_pairs
        .pairs
        .iter()
        .zip(&est_pairs.pairs)
        .zip(&var_pairs.pairs)
    {
        rows.push(io::PlotRow {
            t: rp.t,
            truth: rp.truth[ai],
            raw: rp.value[ai],
            smoothed: ep.value[ai],
            sigma3: 3.0 * vp.value[ai].sqrt(),
        });
    }
    io::write_plot_series(path, axis, &rows).map_err(CliError::from)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    ensure_out_dir(&args.out)?;
    let mode = if args.per_run {
        PoolingMode::PerRunMedian
    } else {
        PoolingMode::Pooled
    };

    let mut all_inputs: Vec<EvalInputs> = Vec::new();
    if let Some(runs_dir) = &args.runs_dir {
        if !runs_dir.is_dir() {
            return Err(CliError::Usage(format!(
                "missing runs directory: {}",
                runs_dir.display()
            )));
        }
        let mut run_dirs: Vec<PathBuf> = fs::read_dir(runs_dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", runs_dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_dir() && p.join("estimates.csv").is_file())
            .collect();
        run_dirs.sort();
        if run_dirs.is_empty() {
            return Err(CliError::Usage(format!(
                "no run directories with estimates.csv under {}",
                runs_dir.display()
            )));
        }
        for dir in run_dirs {
            let label = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".to_string());
            all_inputs.push(load_eval_inputs(
                label,
                &dir.join("estimates.csv"),
                &dir.join("truth.csv"),
                &dir.join("windows.csv"),
                Some(&dir.join("measurements.csv")),
            )?);
        }
    } else {
        let estimates = args.estimates.as_ref().expect("required by clap");
        let truth = args.truth.as_ref().expect("required by clap");
        let windows = args.windows.as_ref().expect("required by clap");
        require_file(estimates, "estimates")?;
        require_file(truth, "truth")?;
        require_file(windows, "windows")?;
        if let Some(m) = &args.measurements {
            require_file(m, "measurements")?;
        }
        all_inputs.push(load_eval_inputs(
            "run".to_string(),
            estimates,
            truth,
            windows,
            args.measurements.as_ref(),
        )?);
    }

    let mut runs = Vec::new();
    for inputs in &all_inputs {
        runs.push(eval_one(inputs, args.vector_norm)?);
    }
    let report = aggregate_batch(&runs)?;
    io::write_report_csv(&args.out.join("report.csv"), &report)?;
    io::write_report_text(&args.out.join("report.txt"), &report, mode)?;
    if args.plot_data {
        for inputs in &all_inputs {
            let name = if all_inputs.len() == 1 {
                "plot.csv".to_string()
            } else {
                format!("plot_{}.csv", inputs.label)
            };
            write_plot(inputs, &args.out.join(name))?;
        }
    }
    println!(
        "median error reduction: {:.1}% (pooled), {:.1}% (per-run medians)",
        report.pooled.reduction_pct, report.per_run_median.reduction_pct
    );
    Ok(())
}

pub fn batch(args: &BatchArgs) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::Usage("need at least one run".to_string()));
    }
    let kv = load_config(args.config.as_ref())?;
    let rig = rig_from_config(kv.as_ref(), args.frozen_axis)?;
    ensure_out_dir(&args.out)?;

    let mut runs: Vec<(String, RunErrors<f64>)> = Vec::new();
    let mut all_inputs: Vec<EvalInputs> = Vec::new();
    for k in 0..args.runs {
        let seed = args.seed + k as u64;
        let dir = args.out.join(format!("run_{k:03}"));
        simulate_into(&dir, kv.as_ref(), args.config.as_ref(), seed)?;
        estimate_into(
            &dir,
            &dir.join("measurements.csv"),
            &rig,
            args.config.as_ref(),
        )?;
        let inputs = load_eval_inputs(
            format!("run_{k:03}"),
            &dir.join("estimates.csv"),
            &dir.join("truth.csv"),
            &dir.join("windows.csv"),
            Some(&dir.join("measurements.csv")),
        )?;
        runs.push(eval_one(&inputs, false)?);
        all_inputs.push(inputs);
    }

    let report = aggregate_batch(&runs)?;
    let mode = if args.per_run {
        PoolingMode::PerRunMedian
    } else {
        PoolingMode::Pooled
    };
    io::write_report_csv(&args.out.join("report.csv"), &report)?;
    io::write_report_text(&args.out.join("report.txt"), &report, mode)?;
    if args.plot_data {
        for inputs in &all_inputs {
            write_plot(inputs, &args.out.join(format!("plot_{}.csv", inputs.label)))?;
        }
    }
    RunManifest {
        command: "batch".to_string(),
        config: args.config.clone(),
        seed: Some(args.seed),
        inputs: vec![],
        outputs: vec![args.out.join("report.csv"), args.out.join("report.txt")],
        flags: {
            let mut f = vec![format!("runs={}", args.runs)];
            if args.frozen_axis {
                f.push("frozen_axis".to_string());
            }
            f
        },
    }
    .write(&args.out)?;
    println!(
        "batch of {} runs: median error reduction {:.1}% (pooled), {:.1}% (per-run medians)",
        args.runs, report.pooled.reduction_pct, report.per_run_median.reduction_pct
    );
    Ok(())
}
