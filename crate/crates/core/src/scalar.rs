//! Floating-point abstraction shared by the closed-form and numerical code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// IEEE float usable by the barrier math: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Half-width of the band around `(r/σ)K² = 1` treated as the turning point.
    fn turning_tolerance() -> Self;

    /// Below this `u`, `artanh(u) - u` is summed as a short odd series.
    fn series_crossover() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot represent at all.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl Scalar for f64 {
    fn turning_tolerance() -> Self {
        1e-12
    }

    fn series_crossover() -> Self {
        1e-4
    }
}

impl Scalar for f32 {
    fn turning_tolerance() -> Self {
        1e-6
    }

    fn series_crossover() -> Self {
        2e-2
    }
}
