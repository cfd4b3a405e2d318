//! Scalar abstraction shared by every numeric module.

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Floating-point scalar the geometry, perception, kinematics and planner
/// modules are generic over. Implemented for `f32` and `f64`.
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync + 'static {
    /// Absolute tolerance used for "exact" geometric checks
    /// (orthonormality, unit axes, boundary membership).
    const GEOM_TOL: f64;
}

impl Real for f32 {
    const GEOM_TOL: f64 = 1e-4;
}

impl Real for f64 {
    const GEOM_TOL: f64 = 1e-9;
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Lossy conversion back to `f64`, used for reporting and RNG plumbing.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn tol<T: Real>() -> T {
    lit(T::GEOM_TOL)
}

#[inline]
pub(crate) fn infinity<T: Real>() -> T {
    lit(f64::INFINITY)
}
