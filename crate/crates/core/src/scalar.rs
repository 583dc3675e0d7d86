//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the geometry and solvers are written against (`f32` or `f64`).
///
/// Besides the arithmetic supertraits, each implementation pins the numerical
/// thresholds that depend on the working precision: the tolerance used when
/// validating manifold constraints, and the norm below which series expansions
/// replace the closed-form `sinh`/`cosh` ratios.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance for point/tangent constraint checks.
    fn constraint_tol() -> Self;

    /// Norm below which exp/log/Jacobi factors switch to Taylor expansions.
    fn small_norm() -> Self;

    /// Converts an `f64` literal; panics only if the value is not representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
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

impl Scalar for f64 {
    fn constraint_tol() -> Self {
        1e-10
    }

    fn small_norm() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn constraint_tol() -> Self {
        1e-4
    }

    fn small_norm() -> Self {
        1e-4
    }
}
