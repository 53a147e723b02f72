//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Real`], a trait alias
//! bundling what the algorithms need: real-field arithmetic (including the
//! matrix decompositions nalgebra provides for any `RealField`), conversions
//! from primitive constants, and `Copy` semantics. `f64` is the intended
//! production type; `f32` works but is too coarse for the default tolerances.

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type for all numeric computation in this crate.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum<Self>
{
    /// Shorthand for lossy conversion from `f64` constants.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    /// `true` if the value is neither NaN nor infinite.
    fn is_finite_real(self) -> bool {
        self.to_f64().map(f64::is_finite).unwrap_or(false)
    }
}

impl<T> Real for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum<T>
{
}
