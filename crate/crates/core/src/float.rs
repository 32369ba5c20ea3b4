//! Scalar abstraction: every numerical routine in this crate is generic over
//! [`Float`], which is implemented for `f32` and `f64`.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar (f32 or f64).
pub trait Float: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

impl Float for f32 {}
impl Float for f64 {}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn cst<T: Float>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

/// Converts the working scalar into `f64` for reporting and serialization.
#[inline]
pub fn to_f64<T: Float>(x: T) -> f64 {
    x.to_f64().expect("scalar not representable as f64")
}
