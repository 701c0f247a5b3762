//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the chain, solver and policy code is generic over.
///
/// Implemented for `f32` and `f64`. The associated tolerances are the
/// precision-dependent thresholds used for validation and certification;
/// the `f64` values are the documented defaults of the library.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Allowed deviation of a row sum (or distribution mass) from one.
    const ROW_SUM_TOL: f64;
    /// Allowed `‖πP − π‖₁` for an accepted invariant distribution.
    const FIXED_POINT_TOL: f64;
    /// Default eigenvalue bracket width for the power iteration.
    const SOLVER_TOL: f64;
    /// Allowed ACOE residual for an accepted solver output.
    const ACOE_TOL: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Scalar for f64 {
    const ROW_SUM_TOL: f64 = 1e-9;
    const FIXED_POINT_TOL: f64 = 1e-10;
    const SOLVER_TOL: f64 = 1e-12;
    const ACOE_TOL: f64 = 1e-8;
}

impl Scalar for f32 {
    const ROW_SUM_TOL: f64 = 1e-5;
    const FIXED_POINT_TOL: f64 = 1e-4;
    const SOLVER_TOL: f64 = 1e-5;
    const ACOE_TOL: f64 = 1e-4;
}

/// Numerically stable `log Σ exp(terms)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Scalar, I>(terms: I) -> T
where
    I: IntoIterator<Item = T> + Clone,
{
    let max = terms
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = terms.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}
