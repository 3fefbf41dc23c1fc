//! Scalar abstraction: every numerical routine in this crate is generic over
//! a floating-point type implementing [`Real`]. Concrete aliases for `f64`
//! live at the crate root.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    Float + FromPrimitive + NumAssign + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + NumAssign + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn c<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("constant representable in scalar type")
}

/// `1/2` in the working scalar type.
#[inline]
pub fn half<T: Real>() -> T {
    c(0.5)
}

/// `2` in the working scalar type.
#[inline]
pub fn two<T: Real>() -> T {
    c(2.0)
}
