//! Batch continuous-time smoothing of angular-velocity estimates under a
//! white-noise-on-jerk motion prior.
//!
//! Per axis the latent state is `[ω, ω̇]` with white noise entering at ω̈
//! (power spectral density `jerk_psd`). The prior is Markovian, so the
//! full-information posterior is computed exactly in linear time by a
//! forward Kalman filter and a backward smoothing pass; a dense batch
//! solve would give the same answer and is kept only as a test oracle.
//! Rejected axes contribute no measurement at their knot — they are
//! prediction-only steps, never pseudo-measurements.
//!
//! Queries between knots evaluate the Gauss-Markov bridge conditioned on
//! the joint posterior of the two neighbouring knots, which is the exact
//! posterior at the query time under the same prior.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::Error;
use crate::imu::{Axis, AxisSource, VelocityEstimate};
use crate::scalar::{cast, Scalar};

/// Diffuse-but-finite initial variance for unobserved state components.
const INIT_VAR: f64 = 1e4;

/// Posterior of one axis at one knot: mean `[ω, ω̇]` and 2×2 covariance.
#[derive(Clone, Copy, Debug)]
pub struct SmootherState<S: Scalar> {
    pub mean: Vector2<S>,
    pub cov: Matrix2<S>,
}

/// Full-information posterior over the input knots, queryable at any time
/// inside the span.
#[derive(Clone, Debug)]
pub struct SmoothedTrajectory<S: Scalar> {
    times: Vec<f64>,
    knots: [Vec<SmootherState<S>>; 3],
    /// Backward-pass gains per interval, needed for the cross-covariance
    /// term of interpolated covariances.
    gains: [Vec<Matrix2<S>>; 3],
    /// Provenance of the measurement that fed each knot, per axis.
    input_sources: Vec<[AxisSource; 3]>,
    jerk_psd: S,
}

/// State transition over `dt` for the `[ω, ω̇]` state.
#[inline]
pub fn transition<S: Scalar>(dt: S) -> Matrix2<S> {
    Matrix2::new(S::one(), dt, S::zero(), S::one())
}

/// Process noise over `dt` for white noise on ω̈ with PSD `q`.
#[inline]
pub fn process_noise<S: Scalar>(q: S, dt: S) -> Matrix2<S> {
    let three = cast::<S>(3.0);
    let two = cast::<S>(2.0);
    let dt2 = dt * dt;
    let dt3 = dt2 * dt;
    Matrix2::new(q * dt3 / three, q * dt2 / two, q * dt2 / two, q * dt)
}

fn symmetrize<S: Scalar>(m: &Matrix2<S>) -> Matrix2<S> {
    let half = cast::<S>(0.5);
    (m + m.transpose()) * half
}

fn measurement<S: Scalar>(est: &VelocityEstimate<S>, axis: Axis) -> Option<(S, S)> {
    if est.has_value(axis) {
        Some((est.omega[axis.index()], est.var[axis.index()]))
    } else {
        None
    }
}

/// Smooth a time-ordered sequence of velocity estimates.
///
/// Errors on fewer than 2 estimates or non-increasing timestamps. The
/// three axes are independent under the diagonal prior and are smoothed
/// separately.
pub fn smooth<S: Scalar>(
    estimates: &[VelocityEstimate<S>],
    cfg_jerk_psd: S,
) -> Result<SmoothedTrajectory<S>, Error> {
    let n = estimates.len();
    if n < 2 {
        return Err(Error::TooFewEstimates { got: n });
    }
    for i in 1..n {
        if estimates[i].t <= estimates[i - 1].t {
            return Err(Error::NonMonotonicTime { index: i });
        }
    }
    let times: Vec<f64> = estimates.iter().map(|e| e.t).collect();
    let q = cfg_jerk_psd;
    let mut knots: [Vec<SmootherState<S>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut gains: [Vec<Matrix2<S>>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for axis in Axis::ALL {
        let (sm, g) = smooth_axis(estimates, &times, axis, q);
        knots[axis.index()] = sm;
        gains[axis.index()] = g;
    }

    Ok(SmoothedTrajectory {
        times,
        knots,
        gains,
        input_sources: estimates.iter().map(|e| e.source).collect(),
        jerk_psd: q,
    })
}

fn smooth_axis<S: Scalar>(
    estimates: &[VelocityEstimate<S>],
    times: &[f64],
    axis: Axis,
    q: S,
) -> (Vec<SmootherState<S>>, Vec<Matrix2<S>>) {
    let n = times.len();
    let big = cast::<S>(INIT_VAR);

    let mut filtered: Vec<SmootherState<S>> = Vec::with_capacity(n);
    let mut predicted: Vec<SmootherState<S>> = Vec::with_capacity(n);

    // First knot: absorb the first measurement directly into the prior.
    let first = match measurement(&estimates[0], axis) {
        Some((z, r)) => SmootherState {
            mean: Vector2::new(z, S::zero()),
            cov: Matrix2::new(r, S::zero(), S::zero(), big),
        },
        None => SmootherState {
            mean: Vector2::zeros(),
            cov: Matrix2::new(big, S::zero(), S::zero(), big),
        },
    };
    predicted.push(first);
    filtered.push(first);

    for k in 1..n {
        let dt = cast::<S>(times[k] - times[k - 1]);
        let f = transition(dt);
        let qk = process_noise(q, dt);
        let prev = filtered[k - 1];
        let mp = f * prev.mean;
        let pp = symmetrize(&(f * prev.cov * f.transpose() + qk));
        predicted.push(SmootherState { mean: mp, cov: pp });

        let post = match measurement(&estimates[k], axis) {
            Some((z, r)) => joseph_update(&SmootherState { mean: mp, cov: pp }, z, r),
            None => SmootherState { mean: mp, cov: pp },
        };
        filtered.push(post);
    }

    // Backward pass.
    let mut smoothed = filtered.clone();
    let mut gains: Vec<Matrix2<S>> = vec![Matrix2::zeros(); n - 1];
    for k in (0..n - 1).rev() {
        let dt = cast::<S>(times[k + 1] - times[k]);
        let f = transition(dt);
        let pp_inv = predicted[k + 1]
            .cov
            .try_inverse()
            .expect("predicted covariance positive definite");
        let c = filtered[k].cov * f.transpose() * pp_inv;
        let mean = filtered[k].mean + c * (smoothed[k + 1].mean - predicted[k + 1].mean);
        let cov = symmetrize(
            &(filtered[k].cov + c * (smoothed[k + 1].cov - predicted[k + 1].cov) * c.transpose()),
        );
        smoothed[k] = SmootherState { mean, cov };
        gains[k] = c;
    }

    (smoothed, gains)
}

fn joseph_update<S: Scalar>(prior: &SmootherState<S>, z: S, r: S) -> SmootherState<S> {
    // H = [1 0]; all innovation quantities are scalar.
    let s = prior.cov[(0, 0)] + r;
    let k = Vector2::new(prior.cov[(0, 0)] / s, prior.cov[(1, 0)] / s);
    let innov = z - prior.mean[0];
    let mean = prior.mean + k * innov;
    let a = Matrix2::new(S::one() - k[0], S::zero(), -k[1], S::one());
    let cov = a * prior.cov * a.transpose() + (k * k.transpose()) * r;
    SmootherState {
        mean,
        cov: symmetrize(&cov),
    }
}

impl<S: Scalar> SmoothedTrajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn knot(&self, axis: Axis, k: usize) -> &SmootherState<S> {
        &self.knots[axis.index()][k]
    }

    /// Provenance of the estimate that fed knot `k`.
    pub fn input_source(&self, k: usize) -> [AxisSource; 3] {
        self.input_sources[k]
    }

    /// Posterior mean and variance of ω at time `t` (all axes).
    pub fn query(&self, t: f64) -> Result<(Vector3<S>, Vector3<S>), Error> {
        let mut omega = Vector3::zeros();
        let mut var = Vector3::zeros();
        for axis in Axis::ALL {
            let st = self.query_axis(axis, t)?;
            omega[axis.index()] = st.mean[0];
            var[axis.index()] = st.cov[(0, 0)];
        }
        Ok((omega, var))
    }

    /// Full `[ω, ω̇]` posterior of one axis at time `t`.
    pub fn query_axis(&self, axis: Axis, t: f64) -> Result<SmootherState<S>, Error> {
        let (start, end) = (self.start_time(), self.end_time());
        if !(start..=end).contains(&t) {
            return Err(Error::Extrapolation { t, start, end });
        }
        // partition_point: first index with times[i] > t, so seg is the
        // knot at-or-before t.
        let idx = self.times.partition_point(|&x| x <= t);
        let seg = idx - 1;
        if self.times[seg] == t {
            return Ok(self.knots[axis.index()][seg]);
        }
        let k0 = &self.knots[axis.index()][seg];
        let k1 = &self.knots[axis.index()][seg + 1];
        let gain = &self.gains[axis.index()][seg];

        let dt_full = cast::<S>(self.times[seg + 1] - self.times[seg]);
        let dt_a = cast::<S>(t - self.times[seg]);
        let dt_b = dt_full - dt_a;
        let q = self.jerk_psd;

        let f_a = transition(dt_a);
        let f_full = transition(dt_full);
        let f_b = transition(dt_b);
        let q_a = process_noise(q, dt_a);
        let q_full = process_noise(q, dt_full);
        let q_full_inv = q_full
            .try_inverse()
            .expect("process noise positive definite for dt > 0");

        // Bridge weights: x(t) | x0, x1 ~ N(Λ x0 + Ψ x1, Qc).
        let psi = q_a * f_b.transpose() * q_full_inv;
        let lambda = f_a - psi * f_full;
        let mean = lambda * k0.mean + psi * k1.mean;

        // Joint posterior covariance of (x0, x1) enters through the
        // smoother gain: Cov(x0, x1) = C · P1.
        let cross = gain * k1.cov;
        let qc = q_a - psi * q_full * psi.transpose();
        let cov = lambda * k0.cov * lambda.transpose()
            + psi * k1.cov * psi.transpose()
            + lambda * cross * psi.transpose()
            + psi * cross.transpose() * lambda.transpose()
            + qc;
        Ok(SmootherState {
            mean,
            cov: symmetrize(&cov),
        })
    }

    /// Materialize the posterior at every knot as velocity estimates
    /// tagged smoothed.
    pub fn to_estimates(&self) -> Vec<VelocityEstimate<S>> {
        (0..self.len())
            .map(|k| {
                let mut omega = Vector3::zeros();
                let mut var = Vector3::zeros();
                for axis in Axis::ALL {
                    let st = self.knots[axis.index()][k];
                    omega[axis.index()] = st.mean[0];
                    var[axis.index()] = st.cov[(0, 0)];
                }
                VelocityEstimate {
                    t: self.times[k],
                    omega,
                    var,
                    source: [AxisSource::Smoothed; 3],
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn estimate(t: f64, omega: [f64; 3], var: f64) -> VelocityEstimate<f64> {
        VelocityEstimate {
            t,
            omega: Vector3::from(omega),
            var: Vector3::repeat(var),
            source: [AxisSource::Measured; 3],
        }
    }

    #[test]
    fn constant_signal_is_a_fixed_point() {
        let c = 4.2;
        let ests: Vec<_> = (0..8)
            .map(|i| estimate(i as f64 * 0.1, [c, -c, 0.5], 1e-8))
            .collect();
        let traj = smooth(&ests, 1.0).unwrap();
        for k in 0..traj.len() {
            let st = traj.knot(Axis::X, k);
            assert_relative_eq!(st.mean[0], c, epsilon = 1e-9);
            assert_relative_eq!(st.mean[1], 0.0, epsilon = 1e-6);
        }
        // Query between knots keeps the constant.
        let (omega, _) = traj.query(0.35).unwrap();
        assert_relative_eq!(omega.x, c, epsilon = 1e-9);
        assert_relative_eq!(omega.y, -c, epsilon = 1e-9);
    }

    #[test]
    fn rejects_too_few_estimates() {
        let e = vec![estimate(0.0, [1.0; 3], 0.1)];
        assert!(matches!(
            smooth(&e, 1.0),
            Err(Error::TooFewEstimates { got: 1 })
        ));
    }

    #[test]
    fn rejects_non_increasing_times() {
        let e = vec![
            estimate(0.0, [1.0; 3], 0.1),
            estimate(0.1, [1.0; 3], 0.1),
            estimate(0.1, [1.0; 3], 0.1),
        ];
        assert!(matches!(
            smooth(&e, 1.0),
            Err(Error::NonMonotonicTime { index: 2 })
        ));
    }

    #[test]
    fn query_at_knot_reproduces_knot_exactly() {
        let ests: Vec<_> = (0..5)
            .map(|i| estimate(i as f64 * 0.2, [i as f64, 0.0, 1.0], 0.1))
            .collect();
        let traj = smooth(&ests, 1.0).unwrap();
        for k in 0..traj.len() {
            let (omega, var) = traj.query(traj.times()[k]).unwrap();
            let st = traj.knot(Axis::X, k);
            assert_eq!(omega.x, st.mean[0]);
            assert_eq!(var.x, st.cov[(0, 0)]);
        }
    }

    #[test]
    fn query_outside_span_errors() {
        let ests: Vec<_> = (0..3).map(|i| estimate(i as f64, [1.0; 3], 0.1)).collect();
        let traj = smooth(&ests, 1.0).unwrap();
        assert!(matches!(traj.query(-0.1), Err(Error::Extrapolation { .. })));
        assert!(matches!(traj.query(2.1), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn rejected_knot_has_larger_variance_than_neighbors() {
        let mut ests: Vec<_> = (0..5)
            .map(|i| estimate(i as f64 * 0.1, [2.0, 2.0, 2.0], 1e-4))
            .collect();
        ests[2].source = [AxisSource::Rejected; 3];
        ests[2].omega = Vector3::repeat(f64::NAN);
        let traj = smooth(&ests, 100.0).unwrap();
        let v_mid = traj.knot(Axis::X, 2).cov[(0, 0)];
        let v_left = traj.knot(Axis::X, 1).cov[(0, 0)];
        let v_right = traj.knot(Axis::X, 3).cov[(0, 0)];
        assert!(v_mid > v_left);
        assert!(v_mid > v_right);
        // The bridged mean stays finite and close to the neighbors.
        assert!(traj.knot(Axis::X, 2).mean[0].is_finite());
    }

    #[test]
    fn posterior_variance_never_exceeds_measurement_variance() {
        let ests: Vec<_> = (0..12)
            .map(|i| estimate(i as f64 * 0.05, [(i as f64).sin(), 0.0, 0.0], 0.3))
            .collect();
        let traj = smooth(&ests, 10.0).unwrap();
        for k in 0..traj.len() {
            assert!(traj.knot(Axis::X, k).cov[(0, 0)] <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn axis_permutation_symmetry() {
        let signal: Vec<f64> = (0..10).map(|i| (i as f64 * 0.4).sin() * 12.0).collect();
        let on_x: Vec<_> = signal
            .iter()
            .enumerate()
            .map(|(i, &s)| estimate(i as f64 * 0.1, [s, 0.0, 0.0], 0.05))
            .collect();
        let on_z: Vec<_> = signal
            .iter()
            .enumerate()
            .map(|(i, &s)| estimate(i as f64 * 0.1, [0.0, 0.0, s], 0.05))
            .collect();
        let tx = smooth(&on_x, 50.0).unwrap();
        let tz = smooth(&on_z, 50.0).unwrap();
        for k in 0..tx.len() {
            assert_eq!(tx.knot(Axis::X, k).mean, tz.knot(Axis::Z, k).mean);
            assert_eq!(tx.knot(Axis::X, k).cov, tz.knot(Axis::Z, k).cov);
        }
    }

    #[test]
    fn time_shift_invariance() {
        let ests: Vec<_> = (0..7)
            .map(|i| estimate(i as f64 * 0.13, [(i as f64).cos() * 3.0, 1.0, 0.0], 0.2))
            .collect();
        let shifted: Vec<_> = ests
            .iter()
            .map(|e| VelocityEstimate {
                t: e.t + 1000.0,
                ..*e
            })
            .collect();
        let a = smooth(&ests, 25.0).unwrap();
        let b = smooth(&shifted, 25.0).unwrap();
        for k in 0..a.len() {
            assert_relative_eq!(
                a.knot(Axis::X, k).mean[0],
                b.knot(Axis::X, k).mean[0],
                epsilon = 1e-12
            );
            assert_relative_eq!(
                a.knot(Axis::X, k).cov[(0, 0)],
                b.knot(Axis::X, k).cov[(0, 0)],
                epsilon = 1e-12
            );
        }
        let qa = a.query(0.3).unwrap();
        let qb = b.query(1000.3).unwrap();
        assert_relative_eq!(qa.0.x, qb.0.x, epsilon = 1e-12);
    }

    #[test]
    fn inserting_measurement_free_knot_changes_nothing() {
        let ests: Vec<_> = (0..6)
            .map(|i| estimate(i as f64 * 0.2, [(i as f64) * 1.5, 0.0, 0.0], 0.1))
            .collect();
        let tq = 0.5; // midway between knots 2 and 3
        let base = smooth(&ests, 5.0).unwrap();
        let q_base = base.query(tq).unwrap();

        let mut with_gap: Vec<_> = ests.clone();
        let mut ghost = estimate(tq, [f64::NAN; 3], 0.1);
        ghost.source = [AxisSource::Rejected; 3];
        with_gap.insert(3, ghost);
        let aug = smooth(&with_gap, 5.0).unwrap();
        let q_aug = aug.query(tq).unwrap();

        assert_relative_eq!(q_base.0.x, q_aug.0.x, epsilon = 1e-9);
        assert_relative_eq!(q_base.1.x, q_aug.1.x, epsilon = 1e-9);
        // Other knots unchanged too.
        for (k, est) in ests.iter().enumerate() {
            let ka = base.query(est.t).unwrap();
            let kb = aug.query(est.t).unwrap();
            assert_relative_eq!(ka.0.x, kb.0.x, epsilon = 1e-9);
            let _ = k;
        }
    }

    #[test]
    fn smoothed_output_is_tagged_smoothed() {
        let ests: Vec<_> = (0..3).map(|i| estimate(i as f64, [1.0; 3], 0.1)).collect();
        let traj = smooth(&ests, 1.0).unwrap();
        let out = traj.to_estimates();
        assert!(out.iter().all(|e| e.source == [AxisSource::Smoothed; 3]));
    }
}
