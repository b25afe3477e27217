//! Scalar abstraction so the pipeline math runs on `f32` or `f64`.
//!
//! All algorithms are generic over [`Scalar`]; timestamps stay `f64`
//! everywhere to avoid precision loss in time deltas.

use std::iter::Sum;

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Sum + Send + Sync
{
}

impl<T> Scalar for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Sum + Send + Sync
{
}

/// Convert an `f64` constant or intermediate to the scalar type.
#[inline]
pub fn cast<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("f64 value representable in scalar type")
}

/// Convert a scalar back to `f64` (exact for `f64`, widening for `f32`).
#[inline]
pub fn to_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}

/// Finiteness check that works for any scalar type.
#[inline]
pub fn is_finite<S: Scalar>(v: S) -> bool {
    to_f64(v).is_finite()
}
