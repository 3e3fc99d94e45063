//! Scalar abstraction shared by the linear algebra, state and optics code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Tolerance used when constructing states (Hermiticity, unit trace).
    #[inline]
    fn construction_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Tolerance used for algebraic identities (unitarity, round trips).
    #[inline]
    fn algebraic_tol() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(1024.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
