//! Test oracles, independent of the library's smoothing implementation.

use gyrosat::imu::{Axis, AxisSource, VelocityEstimate};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};

/// One axis of one knot as the oracle sees it: time and an optional
/// (value, variance) measurement.
#[derive(Clone, Copy, Debug)]
pub struct OracleKnot {
    pub t: f64,
    pub meas: Option<(f64, f64)>,
}

/// Brute-force batch posterior for the `[ω, ω̇]` chain with white noise on
/// ω̈: assemble the full 2N×2N precision matrix from the initial prior,
/// the transition factors, and the measurement factors, then solve it
/// densely. Mirrors the smoother's initialization: the first measurement
/// is absorbed into the prior on knot 0 with rate variance 1e4.
pub fn dense_posterior(knots: &[OracleKnot], q: f64) -> Vec<(Vector2<f64>, Matrix2<f64>)> {
    let n = knots.len();
    assert!(n >= 2);
    let dim = 2 * n;
    let mut precision = DMatrix::<f64>::zeros(dim, dim);
    let mut info = DVector::<f64>::zeros(dim);

    // Prior on knot 0.
    let big = 1e4;
    let (mu0, p0) = match knots[0].meas {
        Some((z, r)) => (Vector2::new(z, 0.0), Matrix2::new(r, 0.0, 0.0, big)),
        None => (Vector2::zeros(), Matrix2::new(big, 0.0, 0.0, big)),
    };
    let p0_inv = p0.try_inverse().unwrap();
    for i in 0..2 {
        for j in 0..2 {
            precision[(i, j)] += p0_inv[(i, j)];
        }
        info[i] += (p0_inv * mu0)[i];
    }

    // Transition factors x_{k+1} = F x_k + w, w ~ N(0, Q).
    for k in 0..n - 1 {
        let dt = knots[k + 1].t - knots[k].t;
        let f = Matrix2::new(1.0, dt, 0.0, 1.0);
        let qm = Matrix2::new(
            q * dt.powi(3) / 3.0,
            q * dt.powi(2) / 2.0,
            q * dt.powi(2) / 2.0,
            q * dt,
        );
        let q_inv = qm.try_inverse().unwrap();
        let a = f.transpose() * q_inv * f;
        let b = f.transpose() * q_inv;
        let (r0, r1) = (2 * k, 2 * (k + 1));
        for i in 0..2 {
            for j in 0..2 {
                precision[(r0 + i, r0 + j)] += a[(i, j)];
                precision[(r0 + i, r1 + j)] -= b[(i, j)];
                precision[(r1 + i, r0 + j)] -= b.transpose()[(i, j)];
                precision[(r1 + i, r1 + j)] += q_inv[(i, j)];
            }
        }
    }

    // Measurement factors at knots 1.. (knot 0 is absorbed in the prior).
    for (k, knot) in knots.iter().enumerate().skip(1) {
        if let Some((z, r)) = knot.meas {
            precision[(2 * k, 2 * k)] += 1.0 / r;
            info[2 * k] += z / r;
        }
    }

    let chol = precision
        .clone()
        .cholesky()
        .expect("posterior precision positive definite");
    let mut mean = chol.solve(&info);
    // One step of iterative refinement for the mean and one Newton step
    // for the inverse keep the dense route accurate even when the mixed
    // prior/measurement scales make the precision matrix ill-conditioned.
    let residual = &info - &precision * &mean;
    mean += chol.solve(&residual);
    let cov0 = chol.inverse();
    let cov2 = &cov0 * 2.0 - &cov0 * &precision * &cov0;
    let cov = (&cov2 + cov2.transpose()) * 0.5;

    (0..n)
        .map(|k| {
            let m = Vector2::new(mean[2 * k], mean[2 * k + 1]);
            let c = Matrix2::new(
                cov[(2 * k, 2 * k)],
                cov[(2 * k, 2 * k + 1)],
                cov[(2 * k + 1, 2 * k)],
                cov[(2 * k + 1, 2 * k + 1)],
            );
            (m, c)
        })
        .collect()
}

/// Posterior at an off-knot time via the same dense solve: insert a
/// measurement-free knot at `t` and read it back.
pub fn dense_posterior_at(knots: &[OracleKnot], q: f64, t: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let mut augmented = knots.to_vec();
    let pos = augmented.partition_point(|k| k.t < t);
    assert!(pos > 0 && pos < augmented.len(), "t must be interior");
    assert!(augmented[pos].t != t, "t must not be a knot");
    augmented.insert(pos, OracleKnot { t, meas: None });
    dense_posterior(&augmented, q)[pos]
}

/// Velocity estimates carrying the same single-axis instance on all three
/// axes, so the library input can be built from oracle knots.
pub fn estimates_from_knots(knots: &[OracleKnot]) -> Vec<VelocityEstimate<f64>> {
    knots
        .iter()
        .map(|k| {
            let (omega, var, source) = match k.meas {
                Some((z, r)) => (
                    Vector3::repeat(z),
                    Vector3::repeat(r),
                    [AxisSource::Measured; 3],
                ),
                None => (
                    Vector3::repeat(f64::NAN),
                    Vector3::repeat(1.0),
                    [AxisSource::Rejected; 3],
                ),
            };
            VelocityEstimate {
                t: k.t,
                omega,
                var,
                source,
            }
        })
        .collect()
}

/// Scale-aware difference: absolute below unit scale, relative above.
/// Unobserved state components carry the diffuse 1e4 prior variance,
/// where f64 cannot represent differences below ~1e-12 relative, so a
/// plain absolute comparison at 1e-8 would measure rounding noise of the
/// dense route rather than disagreement.
pub fn divergence(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

/// Covariance entries are compared at the scale of their block: an
/// off-diagonal that is exactly zero between two 1e4-scale variances is
/// only computable to ~1e4·ε by any route.
fn cov_divergence(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let scale = (a[(i, i)] * a[(j, j)]).sqrt().max(1.0);
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / scale);
        }
    }
    worst
}

/// Largest divergence between the library posterior and the oracle
/// posterior over all knots (mean and covariance entries).
pub fn max_divergence(
    traj: &gyrosat::smoother::SmoothedTrajectory<f64>,
    oracle: &[(Vector2<f64>, Matrix2<f64>)],
) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, (om, oc)) in oracle.iter().enumerate() {
        let st = traj.knot(Axis::X, k);
        for i in 0..2 {
            worst = worst.max(divergence(om[i], st.mean[i]));
        }
        worst = worst.max(cov_divergence(oc, &st.cov));
    }
    worst
}
