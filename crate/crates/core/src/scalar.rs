//! Floating-point scalar abstraction shared by the analytic layers.
//!
//! Special functions, limit laws, quadrature and the empirical-distribution
//! machinery are written against [`Real`], so they run in `f32` or `f64`.
//! The samplers stay concrete in `f64`: tail probabilities near `1e-16`
//! are meaningless in single precision.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// A real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Machine epsilon scaled to something usable as a quadrature floor.
    fn tolerance_floor() -> Self {
        Self::epsilon() * Self::from_f64(64.0).unwrap()
    }

    /// Lossless-enough conversion from `f64` constants.
    #[inline]
    fn c(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable")
    }

    /// Conversion from a count or index.
    #[inline]
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}
