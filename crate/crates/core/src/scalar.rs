//! Scalar abstraction shared by every module.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type the library is generic over (`f32` or `f64`).
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {
    /// Entries with modulus at or below this value are not stored.
    fn drop_tolerance() -> Self;

    /// Smallest tolerance that is meaningful at this precision.
    fn tolerance_floor() -> f64;
}

impl Real for f64 {
    fn drop_tolerance() -> Self {
        1e-14
    }

    fn tolerance_floor() -> f64 {
        0.0
    }
}

impl Real for f32 {
    fn drop_tolerance() -> Self {
        1e-7
    }

    fn tolerance_floor() -> f64 {
        1e-4
    }
}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable")
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Real>(x: usize) -> T {
    T::from_usize(x).expect("count representable")
}

/// Converts `T` back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A requested tolerance, raised to what the precision of `T` can honour.
#[inline]
pub fn tol<T: Real>(requested: f64) -> T {
    real(requested.max(T::tolerance_floor()))
}

#[inline]
pub fn cr<T: Real>(re: f64) -> C<T> {
    C::new(real(re), T::zero())
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> C<T> {
    C::new(T::one(), T::zero())
}

/// Modulus of a complex number without requiring `num_traits::Float`.
#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    z.norm_sqr().sqrt()
}

/// `(-1)^k` as a real scalar.
#[inline]
pub fn sign<T: Real>(odd: bool) -> T {
    if odd {
        -T::one()
    } else {
        T::one()
    }
}
