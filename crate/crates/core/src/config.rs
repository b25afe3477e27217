//! Flat key-value configuration files.
//!
//! One file can carry both scenario and rig keys; each consumer reads the
//! keys it needs. Syntax: `key = value` per line, `#` comments, vectors as
//! whitespace- or comma-separated numbers, SI units throughout. Repeated
//! `collision` keys accumulate; for any other key the last value wins.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::Error;
use crate::imu::RigConfig;
use crate::scalar::{cast, Scalar};
use crate::sim::{CollisionEvent, TumbleConfig};

/// Keys understood by any consumer of a config file.
const KNOWN_KEYS: &[&str] = &[
    // rig / estimator
    "com_to_imu",
    "gyro_sat",
    "gyro_noise_var",
    "estimate_var",
    "jerk_psd",
    "sat_margin",
    "r_min",
    "frozen_axis",
    "accel_rail",
    "gyro_rail_band",
    // scenario
    "inertia_diag",
    "gravity",
    "omega0",
    "duration",
    "sample_rate",
    "accel_noise_var",
    "collision",
    "seed",
];

/// Parsed key-value file.
#[derive(Clone, Debug)]
pub struct KvFile {
    path: String,
    entries: Vec<(String, String, usize)>,
}

impl KvFile {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, Error> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: i + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: i + 1,
                    msg: format!("unknown key `{key}`"),
                });
            }
            entries.push((key, value.trim().to_string(), i + 1));
        }
        Ok(Self {
            path: path.to_string(),
            entries,
        })
    }

    fn last(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    fn all(&self, key: &str) -> Vec<(&str, usize)> {
        self.entries
            .iter()
            .filter(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
            .collect()
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn numbers(&self, value: &str, line: usize, key: &str) -> Result<Vec<f64>, Error> {
        value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| self.err(line, format!("invalid number `{p}` for {key}")))
                    .and_then(|v| {
                        if v.is_finite() {
                            Ok(v)
                        } else {
                            Err(self.err(line, format!("non-finite value for {key}")))
                        }
                    })
            })
            .collect()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, Error> {
        match self.last(key) {
            None => Ok(None),
            Some((v, line)) => {
                let nums = self.numbers(v, line, key)?;
                if nums.len() != 1 {
                    return Err(self.err(line, format!("{key} expects a single number")));
                }
                Ok(Some(nums[0]))
            }
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, Error> {
        match self.last(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| self.err(line, format!("{key} expects an unsigned integer"))),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, Error> {
        match self.last(key) {
            None => Ok(None),
            Some((v, line)) => match v {
                "true" | "1" => Ok(Some(true)),
                "false" | "0" => Ok(Some(false)),
                _ => Err(self.err(line, format!("{key} expects true/false"))),
            },
        }
    }

    pub fn get_vec3<S: Scalar>(&self, key: &str) -> Result<Option<Vector3<S>>, Error> {
        match self.last(key) {
            None => Ok(None),
            Some((v, line)) => {
                let nums = self.numbers(v, line, key)?;
                match nums.len() {
                    3 => Ok(Some(Vector3::new(
                        cast(nums[0]),
                        cast(nums[1]),
                        cast(nums[2]),
                    ))),
                    // A single number broadcasts to all axes (handy for
                    // uniform saturation thresholds).
                    1 => Ok(Some(Vector3::repeat(cast(nums[0])))),
                    n => Err(self.err(line, format!("{key} expects 1 or 3 numbers, got {n}"))),
                }
            }
        }
    }

    /// Collision events: `collision = t dwx dwy dwz dvx dvy dvz duration`.
    pub fn get_collisions<S: Scalar>(&self) -> Result<Option<Vec<CollisionEvent<S>>>, Error> {
        let raw = self.all("collision");
        if raw.is_empty() {
            return Ok(None);
        }
        let mut events = Vec::with_capacity(raw.len());
        for (v, line) in raw {
            let nums = self.numbers(v, line, "collision")?;
            if nums.len() != 8 {
                return Err(self.err(
                    line,
                    format!(
                        "collision expects 8 numbers (t dwx dwy dwz dvx dvy dvz duration), got {}",
                        nums.len()
                    ),
                ));
            }
            events.push(CollisionEvent {
                t: nums[0],
                delta_omega: Vector3::new(cast(nums[1]), cast(nums[2]), cast(nums[3])),
                delta_v: Vector3::new(cast(nums[4]), cast(nums[5]), cast(nums[6])),
                duration: nums[7],
            });
        }
        Ok(Some(events))
    }
}

/// Build a rig configuration from a config file, falling back to defaults
/// for absent keys. Validates before returning.
pub fn rig_from_kv<S: Scalar>(kv: &KvFile) -> Result<RigConfig<S>, Error> {
    let mut cfg = RigConfig::<S>::default();
    if let Some(v) = kv.get_vec3::<S>("com_to_imu")? {
        cfg.com_to_imu = v;
    }
    if let Some(v) = kv.get_vec3::<S>("gyro_sat")? {
        cfg.gyro_sat = v;
        // Default margin tracks the threshold unless overridden below.
        let min_sat = v.x.min(v.y).min(v.z);
        cfg.sat_margin = min_sat * cast(0.02);
    }
    if let Some(v) = kv.get_f64("gyro_noise_var")? {
        cfg.gyro_noise_var = cast(v);
    }
    if let Some(v) = kv.get_f64("estimate_var")? {
        cfg.estimate_var = cast(v);
    }
    if let Some(v) = kv.get_f64("jerk_psd")? {
        cfg.jerk_psd = cast(v);
    }
    if let Some(v) = kv.get_f64("sat_margin")? {
        cfg.sat_margin = cast(v);
    }
    if let Some(v) = kv.get_f64("r_min")? {
        cfg.r_min = cast(v);
    }
    if let Some(v) = kv.get_bool("frozen_axis")? {
        cfg.frozen_axis = v;
    }
    if let Some(v) = kv.get_f64("accel_rail")? {
        cfg.accel_rail = Some(cast(v));
    }
    if let Some(v) = kv.get_f64("gyro_rail_band")? {
        cfg.gyro_rail_band = Some(cast(v));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Build the tumble-generator overrides from a config file.
pub fn tumble_from_kv<S: Scalar>(kv: &KvFile) -> Result<TumbleConfig<S>, Error> {
    Ok(TumbleConfig {
        inertia_diag: kv.get_vec3("inertia_diag")?,
        com_to_imu: kv.get_vec3("com_to_imu")?,
        gravity: kv.get_vec3("gravity")?,
        omega0: kv.get_vec3("omega0")?,
        duration: kv.get_f64("duration")?,
        collisions: kv.get_collisions()?,
        sample_rate: kv.get_f64("sample_rate")?,
        gyro_noise_var: kv.get_f64("gyro_noise_var")?.map(cast),
        accel_noise_var: kv.get_f64("accel_noise_var")?.map(cast),
        gyro_sat: kv.get_vec3("gyro_sat")?,
        accel_rail: kv.get_f64("accel_rail")?.map(cast),
    })
}

/// Seed recorded in the file, if any (CLI flags take precedence).
pub fn seed_from_kv(kv: &KvFile) -> Result<Option<u64>, Error> {
    kv.get_u64("seed")
}
