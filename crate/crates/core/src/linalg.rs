//! Dense helpers on coordinate slices.

use crate::scalar::Scalar;

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub(crate) fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

#[inline]
pub(crate) fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

#[inline]
pub(crate) fn scale<S: Scalar>(a: &[S], s: S) -> Vec<S> {
    a.iter().map(|&x| x * s).collect()
}

/// `a * x + y`
#[inline]
pub(crate) fn axpy<S: Scalar>(a: S, x: &[S], y: &[S]) -> Vec<S> {
    x.iter().zip(y).map(|(&xi, &yi)| a * xi + yi).collect()
}

#[inline]
pub(crate) fn all_finite<S: Scalar>(a: &[S]) -> bool {
    a.iter().all(|v| v.is_finite())
}

#[inline]
pub(crate) fn max_abs<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
}

/// Dense matrix-vector product with a row-major matrix.
pub(crate) fn matvec<S: Scalar>(rows: &[Vec<S>], x: &[S]) -> Vec<S> {
    rows.iter().map(|r| dot(r, x)).collect()
}
