use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar used by every solver in the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Residual tolerance for bracketed root solves.
    fn root_tol() -> Self;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f64 {
    fn root_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn root_tol() -> Self {
        1e-5
    }
}
