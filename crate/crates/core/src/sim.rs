//! Ground-truth tumbling simulator.
//!
//! Integrates a torque-free rigid body in free fall with RK4, optionally
//! perturbed by short finite-duration collision events, and synthesizes
//! proper-acceleration and clipped gyroscope measurements at an IMU offset
//! from the COM. Collision events are constant-rate velocity changes:
//! instantaneous impulses would be invisible to a sampled accelerometer,
//! while finite events produce the acceleration spikes and the brief
//! assumption violations that the smoother has to absorb.
//!
//! Measurement synthesis uses the exact rigid-body offset `t` in
//! `ω̇ × t + ω × (ω × t)`, so estimator error under model mismatch is
//! measurable rather than defined away.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::imu::ImuSample;
use crate::scalar::{cast, to_f64, Scalar};

/// Inertial and geometric description of the simulated body.
#[derive(Clone, Debug)]
pub struct BodyModel<S: Scalar> {
    /// Inertia tensor about the COM, kg·m², body frame.
    pub inertia: Matrix3<S>,
    /// COM → IMU offset, m, body frame.
    pub com_to_imu: Vector3<S>,
    /// Gravity, m/s², world frame.
    pub gravity: Vector3<S>,
    inertia_inv: Matrix3<S>,
}

impl<S: Scalar> BodyModel<S> {
    pub fn new(inertia: Matrix3<S>, com_to_imu: Vector3<S>) -> Result<Self, Error> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        let sym_err = to_f64((inertia - inertia.transpose()).norm());
        if sym_err > 1e-9 * to_f64(inertia.norm()).max(1.0) {
            return bad("inertia tensor must be symmetric".to_string());
        }
        let eigen = inertia.symmetric_eigenvalues();
        let mut lambda = [to_f64(eigen[0]), to_f64(eigen[1]), to_f64(eigen[2])];
        lambda.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if lambda[0] <= 0.0 {
            return bad(format!(
                "inertia tensor must be positive definite, got eigenvalue {}",
                lambda[0]
            ));
        }
        // Physical inertia tensors satisfy the triangle inequalities.
        if lambda[0] + lambda[1] < lambda[2] * (1.0 - 1e-9) {
            return bad(format!(
                "inertia eigenvalues violate the triangle inequality: {} + {} < {}",
                lambda[0], lambda[1], lambda[2]
            ));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::InvalidScenario("inertia tensor not invertible".to_string()))?;
        Ok(Self {
            inertia,
            com_to_imu,
            gravity: Vector3::new(S::zero(), S::zero(), cast(-9.81)),
            inertia_inv,
        })
    }

    pub fn from_diagonal(diag: Vector3<S>, com_to_imu: Vector3<S>) -> Result<Self, Error> {
        Self::new(Matrix3::from_diagonal(&diag), com_to_imu)
    }

    pub fn with_gravity(mut self, gravity: Vector3<S>) -> Self {
        self.gravity = gravity;
        self
    }

    #[inline]
    pub fn inertia_inv(&self) -> &Matrix3<S> {
        &self.inertia_inv
    }
}

/// Rigid-body ground-truth state.
#[derive(Clone, Copy, Debug)]
pub struct SimState<S: Scalar> {
    /// Orientation body → world, renormalized every step.
    pub q: UnitQuaternion<S>,
    /// Angular velocity, rad/s, body frame.
    pub omega: Vector3<S>,
    /// COM position, m, world frame.
    pub p: Vector3<S>,
    /// COM velocity, m/s, world frame.
    pub v: Vector3<S>,
    /// Seconds.
    pub t: f64,
}

impl<S: Scalar> SimState<S> {
    pub fn new(q: UnitQuaternion<S>, omega: Vector3<S>) -> Self {
        Self {
            q,
            omega,
            p: Vector3::zeros(),
            v: Vector3::zeros(),
            t: 0.0,
        }
    }
}

/// A short constant-rate velocity change: `delta_omega` is applied in the
/// body frame, `delta_v` in the world frame, both spread over `duration`.
#[derive(Clone, Copy, Debug)]
pub struct CollisionEvent<S: Scalar> {
    pub t: f64,
    pub delta_omega: Vector3<S>,
    pub delta_v: Vector3<S>,
    pub duration: f64,
}

impl<S: Scalar> CollisionEvent<S> {
    fn active_at(&self, t: f64) -> bool {
        t >= self.t && t < self.t + self.duration
    }
}

/// Torque-free angular acceleration `I⁻¹((Iω) × ω)` plus any external term.
#[inline]
pub fn angular_accel<S: Scalar>(
    body: &BodyModel<S>,
    omega: &Vector3<S>,
    external: &Vector3<S>,
) -> Vector3<S> {
    body.inertia_inv * (body.inertia * omega).cross(omega) + external
}

/// Advance the state by `dt` under torque-free free-fall dynamics.
pub fn step<S: Scalar>(state: &SimState<S>, body: &BodyModel<S>, dt: f64) -> SimState<S> {
    step_forced(state, body, dt, &Vector3::zeros(), &Vector3::zeros())
}

/// Advance the state by `dt` with an extra body-frame angular acceleration
/// and an extra world-frame linear acceleration (both constant over the
/// step).
pub fn step_forced<S: Scalar>(
    state: &SimState<S>,
    body: &BodyModel<S>,
    dt: f64,
    alpha_ext_body: &Vector3<S>,
    accel_ext_world: &Vector3<S>,
) -> SimState<S> {
    let h = cast::<S>(dt);
    let half = cast::<S>(0.5);
    let sixth = cast::<S>(1.0 / 6.0);
    let two = cast::<S>(2.0);

    // RK4 on the coupled (q, ω) system; q is integrated as a raw
    // quaternion and renormalized at the end.
    let q0 = state.q.into_inner();
    let w0 = state.omega;
    let deriv = |q: &Quaternion<S>, w: &Vector3<S>| -> (Quaternion<S>, Vector3<S>) {
        let q_dot = q * Quaternion::from_imag(*w) * half;
        let w_dot = angular_accel(body, w, alpha_ext_body);
        (q_dot, w_dot)
    };

    let (k1q, k1w) = deriv(&q0, &w0);
    let (k2q, k2w) = deriv(&(q0 + k1q * (h * half)), &(w0 + k1w * (h * half)));
    let (k3q, k3w) = deriv(&(q0 + k2q * (h * half)), &(w0 + k2w * (h * half)));
    let (k4q, k4w) = deriv(&(q0 + k3q * h), &(w0 + k3w * h));

    let q1 = q0 + (k1q + k2q * two + k3q * two + k4q) * (h * sixth);
    let w1 = w0 + (k1w + k2w * two + k3w * two + k4w) * (h * sixth);

    // Free-fall translation under constant acceleration over the step.
    let a = body.gravity + accel_ext_world;
    let p1 = state.p + state.v * h + a * (h * h * half);
    let v1 = state.v + a * h;

    SimState {
        q: UnitQuaternion::from_quaternion(q1),
        omega: w1,
        p: p1,
        v: v1,
        t: state.t + dt,
    }
}

/// Instantaneous motion quantities needed to synthesize one IMU sample.
#[derive(Clone, Copy, Debug)]
pub struct MotionContext<S: Scalar> {
    /// Angular acceleration, rad/s², body frame.
    pub omega_dot: Vector3<S>,
    /// Coordinate acceleration of the COM, m/s², world frame.
    pub com_accel_world: Vector3<S>,
}

impl<S: Scalar> MotionContext<S> {
    /// Free fall: the COM accelerates at g, torque-free rotation.
    pub fn free_fall(state: &SimState<S>, body: &BodyModel<S>) -> Self {
        Self {
            omega_dot: angular_accel(body, &state.omega, &Vector3::zeros()),
            com_accel_world: body.gravity,
        }
    }

    /// Free fall perturbed by an active collision event.
    pub fn during_event(
        state: &SimState<S>,
        body: &BodyModel<S>,
        event: &CollisionEvent<S>,
    ) -> Self {
        let inv_dur = cast::<S>(1.0 / event.duration);
        Self {
            omega_dot: angular_accel(body, &state.omega, &(event.delta_omega * inv_dur)),
            com_accel_world: body.gravity + event.delta_v * inv_dur,
        }
    }

    /// At rest on the ground: no coordinate acceleration at all.
    pub fn grounded() -> Self {
        Self {
            omega_dot: Vector3::zeros(),
            com_accel_world: Vector3::zeros(),
        }
    }
}

/// Noiseless IMU sample at the offset IMU location.
///
/// The accelerometer reads proper acceleration: the COM term
/// `R_wb·(a_C − g)` (zero in free fall) plus the rotational terms
/// `ω̇ × t + ω × (ω × t)`.
pub fn synthesize_imu<S: Scalar>(
    state: &SimState<S>,
    ctx: &MotionContext<S>,
    body: &BodyModel<S>,
) -> ImuSample<S> {
    let t_vec = body.com_to_imu;
    let a_c_body = state
        .q
        .inverse_transform_vector(&(ctx.com_accel_world - body.gravity));
    let accel =
        a_c_body + ctx.omega_dot.cross(&t_vec) + state.omega.cross(&state.omega.cross(&t_vec));
    ImuSample::new(state.t, state.omega, accel)
}

/// Sensor model: rates, noise, and clipping rails.
#[derive(Clone, Debug)]
pub struct SensorConfig<S: Scalar> {
    /// Sampling rate, Hz.
    pub sample_rate: f64,
    /// Gyro noise variance, (rad/s)².
    pub gyro_noise_var: S,
    /// Accelerometer noise variance, (m/s²)².
    pub accel_noise_var: S,
    /// Per-axis gyro clipping threshold, rad/s.
    pub gyro_sat: Vector3<S>,
    /// Optional accelerometer rail, m/s².
    pub accel_rail: Option<S>,
    pub seed: u64,
}

impl<S: Scalar> Default for SensorConfig<S> {
    fn default() -> Self {
        Self {
            sample_rate: 100.0,
            gyro_noise_var: cast(2.74e-5),
            accel_noise_var: cast(0.01),
            gyro_sat: Vector3::repeat(cast(10.5)),
            accel_rail: None,
            seed: 0,
        }
    }
}

/// A complete simulation scenario.
#[derive(Clone, Debug)]
pub struct Scenario<S: Scalar> {
    pub body: BodyModel<S>,
    pub initial: SimState<S>,
    pub duration: f64,
    pub collisions: Vec<CollisionEvent<S>>,
    pub sensors: SensorConfig<S>,
}

impl<S: Scalar> Scenario<S> {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidScenario(
                "duration must be positive".to_string(),
            ));
        }
        if !(self.sensors.sample_rate.is_finite() && self.sensors.sample_rate > 0.0) {
            return Err(Error::InvalidScenario(
                "sample_rate must be positive".to_string(),
            ));
        }
        let mut events = self.collisions.clone();
        events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        for (i, e) in events.iter().enumerate() {
            if !(e.duration.is_finite() && e.duration > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "collision {} must have positive duration",
                    i
                )));
            }
            if i + 1 < events.len() && e.t + e.duration > events[i + 1].t {
                return Err(Error::InvalidScenario(format!(
                    "collisions {} and {} overlap in time",
                    i,
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Noiseless ground-truth angular velocity at one sample time.
#[derive(Clone, Copy, Debug)]
pub struct TruthSample<S: Scalar> {
    pub t: f64,
    pub omega: Vector3<S>,
}

/// Output of a scenario run.
#[derive(Clone, Debug)]
pub struct SimRun<S: Scalar> {
    pub truth: Vec<TruthSample<S>>,
    pub measurements: Vec<ImuSample<S>>,
}

/// Run a scenario: deterministic per seed. Truth is unclipped and
/// noiseless; measurements carry additive Gaussian noise followed by
/// per-axis gyro clipping (and optional accelerometer rail clipping).
pub fn run_scenario<S: Scalar>(scenario: &Scenario<S>) -> Result<SimRun<S>, Error> {
    scenario.validate()?;
    let rate = scenario.sensors.sample_rate;
    let n_samples = (scenario.duration * rate).floor() as usize + 1;
    // Integration substeps per sample interval keep RK4 error far below
    // sensor noise.
    let substeps = 10usize;

    let mut events = scenario.collisions.clone();
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());

    let mut rng = ChaCha12Rng::seed_from_u64(scenario.sensors.seed ^ 0x6e6f_6973_655f_7267);
    let sigma_g = to_f64(scenario.sensors.gyro_noise_var).sqrt();
    let sigma_a = to_f64(scenario.sensors.accel_noise_var).sqrt();

    let mut truth = Vec::with_capacity(n_samples);
    let mut measurements = Vec::with_capacity(n_samples);
    let mut state = scenario.initial;
    state.t = 0.0;

    for k in 0..n_samples {
        let t_k = k as f64 / rate;
        state.t = t_k;

        let ctx = match events.iter().find(|e| e.active_at(t_k)) {
            Some(e) => MotionContext::during_event(&state, &scenario.body, e),
            None => MotionContext::free_fall(&state, &scenario.body),
        };
        let clean = synthesize_imu(&state, &ctx, &scenario.body);
        truth.push(TruthSample {
            t: t_k,
            omega: state.omega,
        });

        let mut gyro = clean.gyro;
        let mut accel = clean.accel;
        for i in 0..3 {
            let z: f64 = StandardNormal.sample(&mut rng);
            gyro[i] += cast::<S>(sigma_g * z);
        }
        for i in 0..3 {
            let z: f64 = StandardNormal.sample(&mut rng);
            accel[i] += cast::<S>(sigma_a * z);
        }
        for i in 0..3 {
            let sat = scenario.sensors.gyro_sat[i];
            gyro[i] = gyro[i].clamp(-sat, sat);
        }
        if let Some(rail) = scenario.sensors.accel_rail {
            for i in 0..3 {
                accel[i] = accel[i].clamp(-rail, rail);
            }
        }
        measurements.push(ImuSample::new(t_k, gyro, accel));

        // Advance to the next sample time, splitting substeps at event
        // boundaries so each RK4 step sees constant forcing.
        if k + 1 < n_samples {
            let t_next = (k + 1) as f64 / rate;
            let h = (t_next - t_k) / substeps as f64;
            let mut cuts: Vec<f64> = (1..=substeps).map(|j| t_k + h * j as f64).collect();
            for e in &events {
                for b in [e.t, e.t + e.duration] {
                    if b > t_k + 1e-12 && b < t_next - 1e-12 {
                        cuts.push(b);
                    }
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let mut t_cur = t_k;
            for cut in cuts {
                let dt = cut - t_cur;
                if dt <= 0.0 {
                    continue;
                }
                let mid = t_cur + dt * 0.5;
                let (alpha_ext, accel_ext) = match events.iter().find(|e| e.active_at(mid)) {
                    Some(e) => {
                        let inv = cast::<S>(1.0 / e.duration);
                        (e.delta_omega * inv, e.delta_v * inv)
                    }
                    None => (Vector3::zeros(), Vector3::zeros()),
                };
                state = step_forced(&state, &scenario.body, dt, &alpha_ext, &accel_ext);
                t_cur = cut;
            }
            state.t = t_next;
        }
    }

    Ok(SimRun {
        truth,
        measurements,
    })
}

/// Rotational kinetic energy ½·ωᵀIω.
pub fn rotational_energy<S: Scalar>(body: &BodyModel<S>, omega: &Vector3<S>) -> S {
    (body.inertia * omega).dot(omega) * cast::<S>(0.5)
}

/// Body-frame angular momentum norm ‖Iω‖ (equal to the world-frame norm).
pub fn angular_momentum_norm<S: Scalar>(body: &BodyModel<S>, omega: &Vector3<S>) -> S {
    (body.inertia * omega).norm()
}

/// Overridable inputs of the tumble scenario generator. Any field left
/// `None` is drawn from the seeded generator or set to its default.
#[derive(Clone, Debug, Default)]
pub struct TumbleConfig<S: Scalar> {
    pub inertia_diag: Option<Vector3<S>>,
    pub com_to_imu: Option<Vector3<S>>,
    pub gravity: Option<Vector3<S>>,
    pub omega0: Option<Vector3<S>>,
    pub duration: Option<f64>,
    pub collisions: Option<Vec<CollisionEvent<S>>>,
    pub sample_rate: Option<f64>,
    pub gyro_noise_var: Option<S>,
    pub accel_noise_var: Option<S>,
    pub gyro_sat: Option<Vector3<S>>,
    pub accel_rail: Option<S>,
}

fn draw_unit_vector_f64(rng: &mut ChaCha12Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    Vector3::new(s * phi.cos(), s * phi.sin(), z)
}

fn draw_unit_vector<S: Scalar>(rng: &mut ChaCha12Rng) -> Vector3<S> {
    let v = draw_unit_vector_f64(rng);
    Vector3::new(cast(v.x), cast(v.y), cast(v.z))
}

fn draw_orientation<S: Scalar>(rng: &mut ChaCha12Rng) -> UnitQuaternion<S> {
    let mut q = [0.0f64; 4];
    for v in &mut q {
        *v = StandardNormal.sample(rng);
    }
    UnitQuaternion::from_quaternion(Quaternion::new(
        cast(q[0]),
        cast(q[1]),
        cast(q[2]),
        cast(q[3]),
    ))
}

/// Default tumbling-run generator: a body spinning just below the gyro
/// rail, pumped through saturation by a handful of spin-up collisions so
/// the angular speed envelope reaches up to ~19 rad/s over a few seconds.
/// Starting below the rail keeps the first saturated window away from the
/// stream start, where no prior rotation axis exists. The spin sits near
/// a stable inertia axis so the rotation axis wanders slowly, and kicks
/// are loosely aligned with it so they actually build speed. Everything
/// is drawn deterministically from `seed`; `cfg` overrides any part.
pub fn tumble_scenario<S: Scalar>(seed: u64, cfg: &TumbleConfig<S>) -> Result<Scenario<S>, Error> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let inertia_diag = cfg
        .inertia_diag
        .unwrap_or_else(|| Vector3::new(cast(0.12), cast(0.18), cast(0.22)));
    let com_to_imu = cfg
        .com_to_imu
        .unwrap_or_else(|| Vector3::new(cast(0.05), cast(0.12), cast(0.03)));
    let mut body = BodyModel::from_diagonal(inertia_diag, com_to_imu)?;
    if let Some(g) = cfg.gravity {
        body = body.with_gravity(g);
    }

    let duration = cfg.duration.unwrap_or_else(|| rng.random_range(3.0..6.0));

    // Spin axis near the major or minor inertia axis (both are stable
    // under torque-free motion), with some wobble.
    let stable = if rng.random_range(0.0..1.0) < 0.5 {
        Vector3::new(1.0, 0.0, 0.0)
    } else {
        Vector3::new(0.0, 0.0, 1.0)
    };
    let sign: f64 = if rng.random_range(0.0..1.0) < 0.5 {
        1.0
    } else {
        -1.0
    };
    let wobble = draw_unit_vector_f64(&mut rng);
    let spin_dir = (stable * sign + wobble * 0.25).normalize();

    let mag0: f64 = rng.random_range(8.0..10.2);
    let peak: f64 = rng.random_range(11.5..19.0);
    let omega0 = cfg.omega0.unwrap_or_else(|| {
        Vector3::new(cast(spin_dir.x), cast(spin_dir.y), cast(spin_dir.z)) * cast::<S>(mag0)
    });
    let q0 = draw_orientation(&mut rng);

    let collisions = match &cfg.collisions {
        Some(c) => c.clone(),
        None => {
            let count = rng.random_range(3..=8usize);
            let boost = (peak - mag0) / count as f64;
            let mut events: Vec<CollisionEvent<S>> = Vec::new();
            let lo = 0.3;
            let hi = (duration - 0.5).max(lo + 0.1);
            for _ in 0..count {
                // Rejection placement; give up quietly after a bounded
                // number of attempts so generation always terminates.
                for _attempt in 0..64 {
                    let t: f64 = rng.random_range(lo..hi);
                    let dur: f64 = rng.random_range(0.015..0.04);
                    let clear = events.iter().all(|e: &CollisionEvent<S>| {
                        t + dur + 0.05 < e.t || e.t + e.duration + 0.05 < t
                    });
                    if clear {
                        let kick = draw_unit_vector_f64(&mut rng);
                        let dw_mag: f64 = boost * rng.random_range(0.75..1.35);
                        let dw = (spin_dir + kick * 0.45).normalize() * dw_mag;
                        let dv_dir = draw_unit_vector::<S>(&mut rng);
                        let dv_mag: f64 = rng.random_range(0.3..2.0);
                        events.push(CollisionEvent {
                            t,
                            delta_omega: Vector3::new(cast(dw.x), cast(dw.y), cast(dw.z)),
                            delta_v: dv_dir * cast::<S>(dv_mag),
                            duration: dur,
                        });
                        break;
                    }
                }
            }
            events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
            events
        }
    };

    let defaults = SensorConfig::<S>::default();
    let sensors = SensorConfig {
        sample_rate: cfg.sample_rate.unwrap_or(defaults.sample_rate),
        gyro_noise_var: cfg.gyro_noise_var.unwrap_or(defaults.gyro_noise_var),
        accel_noise_var: cfg.accel_noise_var.unwrap_or(defaults.accel_noise_var),
        gyro_sat: cfg.gyro_sat.unwrap_or(defaults.gyro_sat),
        accel_rail: cfg.accel_rail,
        seed,
    };

    let scenario = Scenario {
        body,
        initial: SimState::new(q0, omega0),
        duration,
        collisions,
        sensors,
    };
    scenario.validate()?;
    Ok(scenario)
}
