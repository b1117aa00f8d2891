//! Scalar abstraction shared by every numerical module.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar the toolkit is generic over (`f32` or `f64`).
///
/// The bound deliberately avoids `num_traits::Float` so that method calls such
/// as `sqrt` resolve unambiguously to the `nalgebra` implementations.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Lossy view of a scalar as `f64`, for reporting and CSV output.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc<T: Real>(x: T) -> T {
    let px = T::pi() * x;
    if x.abs() < lit(1e-8) {
        T::one() - px * px / lit(6.0)
    } else {
        px.sin() / px
    }
}

/// Derivative of the normalized sinc with respect to its argument.
pub fn sinc_derivative<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-4) {
        // Taylor: -pi^2 x / 3 + pi^4 x^3 / 30
        let p2 = T::pi() * T::pi();
        -p2 * x / lit(3.0) + p2 * p2 * x * x * x / lit(30.0)
    } else {
        let px = T::pi() * x;
        (px.cos() - px.sin() / px) / x
    }
}
