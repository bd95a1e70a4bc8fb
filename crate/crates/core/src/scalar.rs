//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point type the solvers are generic over.
///
/// Implemented for `f32` and `f64`. Complex quantities are `Complex<T>`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used for geometric predicates (point location, coincidence).
    fn geometric_eps() -> Self;

    /// Relative residual accepted from a direct solve.
    fn solve_tolerance() -> Self;
}

impl Real for f32 {
    fn geometric_eps() -> Self {
        1e-5
    }

    fn solve_tolerance() -> Self {
        1e-3
    }
}

impl Real for f64 {
    fn geometric_eps() -> Self {
        1e-10
    }

    fn solve_tolerance() -> Self {
        crate::skyline::SOLVE_RESIDUAL_TOLERANCE
    }
}

pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}
