//! Scalar objectives and tangent vector fields used to build bifunctions.

use std::fmt;
use std::sync::Arc;

use crate::bregman::{BregmanFunction, GradientFn, ScalarFn};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{Manifold, ManifoldKind, Point, TangentVector};
use crate::scalar::Scalar;

fn require_euclidean(m: &Manifold, what: &str) -> Result<()> {
    if m.kind() != ManifoldKind::Euclidean {
        return Err(Error::Configuration(format!("`{what}` needs the euclidean backend")));
    }
    Ok(())
}

fn check_len(m: &Manifold, len: usize, what: &str) -> Result<()> {
    if len != m.ambient_dim() {
        return Err(Error::Configuration(format!(
            "{what}: expected {} values, found {len}",
            m.ambient_dim()
        )));
    }
    Ok(())
}

/// A smooth objective `φ` with its Riemannian gradient.
#[derive(Clone)]
pub struct ScalarField<S: Scalar> {
    manifold: Manifold,
    value: ScalarFn<S>,
    gradient: GradientFn<S>,
    label: String,
}

impl<S: Scalar> fmt::Debug for ScalarField<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.label)
    }
}

impl<S: Scalar> ScalarField<S> {
    pub fn new(manifold: Manifold, label: impl Into<String>, value: ScalarFn<S>, gradient: GradientFn<S>) -> Self {
        Self {
            manifold,
            value,
            gradient,
            label: label.into(),
        }
    }

    /// `Σ w_i (x_i - c_i)²` on `R^n`.
    pub fn quadratic(manifold: Manifold, center: Vec<S>, weights: Vec<S>) -> Result<Self> {
        require_euclidean(&manifold, "quadratic")?;
        check_len(&manifold, center.len(), "quadratic center")?;
        check_len(&manifold, weights.len(), "quadratic weights")?;
        if weights.iter().any(|w| *w < S::zero()) {
            return Err(Error::Parameter("quadratic weights must be nonnegative".into()));
        }
        let (c1, w1) = (center.clone(), weights.clone());
        Ok(Self::new(
            manifold,
            "quadratic",
            Arc::new(move |x: &Point<S>| {
                x.coords()
                    .iter()
                    .zip(&c1)
                    .zip(&w1)
                    .map(|((&xi, &ci), &wi)| wi * (xi - ci) * (xi - ci))
                    .sum()
            }),
            Arc::new(move |x: &Point<S>| {
                x.coords()
                    .iter()
                    .zip(&center)
                    .zip(&weights)
                    .map(|((&xi, &ci), &wi)| S::two() * wi * (xi - ci))
                    .collect()
            }),
        ))
    }

    /// `<c, x>` on `R^n`.
    pub fn linear(manifold: Manifold, c: Vec<S>) -> Result<Self> {
        require_euclidean(&manifold, "linear")?;
        check_len(&manifold, c.len(), "linear coefficients")?;
        let c1 = c.clone();
        Ok(Self::new(
            manifold,
            "linear",
            Arc::new(move |x: &Point<S>| linalg::dot(x.coords(), &c1)),
            Arc::new(move |_: &Point<S>| c.clone()),
        ))
    }

    /// `½ d²(x, anchor)` on either backend.
    pub fn squared_distance(manifold: Manifold, anchor: Point<S>) -> Self {
        let a1 = anchor.clone();
        Self::new(
            manifold,
            "squared_distance",
            Arc::new(move |x: &Point<S>| {
                let d = manifold.dist(x, &a1).unwrap_or(S::nan());
                S::half() * d * d
            }),
            Arc::new(move |x: &Point<S>| match manifold.log(x, &anchor) {
                Ok(v) => linalg::scale(v.components(), -S::one()),
                Err(_) => vec![S::nan(); manifold.ambient_dim()],
            }),
        )
    }

    /// `Σ_i d(x, a_i)`, whose minimizer is the geometric median of the anchors.
    pub fn sum_of_distances(manifold: Manifold, anchors: Vec<Point<S>>) -> Self {
        let a1 = anchors.clone();
        let field = median_field(manifold, anchors);
        Self::new(
            manifold,
            "sum_of_distances",
            Arc::new(move |x: &Point<S>| {
                a1.iter()
                    .map(|a| manifold.dist(x, a).unwrap_or(S::nan()))
                    .sum()
            }),
            field,
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn value(&self, x: &Point<S>) -> S {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Point<S>) -> TangentVector<S> {
        self.manifold.project_tangent(x, (self.gradient)(x))
    }
}

/// `V(x) = -Σ log(x, a_i) / d(x, a_i)`, with a zero contribution from an anchor at `x`.
fn median_field<S: Scalar>(manifold: Manifold, anchors: Vec<Point<S>>) -> GradientFn<S> {
    Arc::new(move |x: &Point<S>| {
        let mut acc = vec![S::zero(); manifold.ambient_dim()];
        for a in &anchors {
            let Ok(v) = manifold.log(x, a) else {
                return vec![S::nan(); manifold.ambient_dim()];
            };
            let d = manifold.norm(&v);
            if d > S::small_norm() {
                acc = linalg::axpy(-S::one() / d, v.components(), &acc);
            }
        }
        acc
    })
}

/// A tangent vector field `x ↦ V(x) ∈ T_x M`.
#[derive(Clone)]
pub struct VectorField<S: Scalar> {
    manifold: Manifold,
    field: GradientFn<S>,
    label: String,
}

impl<S: Scalar> fmt::Debug for VectorField<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({})", self.label)
    }
}

impl<S: Scalar> VectorField<S> {
    pub fn new(manifold: Manifold, label: impl Into<String>, field: GradientFn<S>) -> Self {
        Self {
            manifold,
            field,
            label: label.into(),
        }
    }

    pub fn gradient_of(phi: &ScalarField<S>) -> Self {
        Self::new(phi.manifold, format!("grad {}", phi.label), phi.gradient.clone())
    }

    /// `A x + b` on `R^n`; `a` is row-major.
    pub fn linear(manifold: Manifold, a: Vec<Vec<S>>, b: Vec<S>) -> Result<Self> {
        require_euclidean(&manifold, "linear field")?;
        check_len(&manifold, a.len(), "matrix rows")?;
        for row in &a {
            check_len(&manifold, row.len(), "matrix row")?;
        }
        check_len(&manifold, b.len(), "offset")?;
        Ok(Self::new(
            manifold,
            "linear",
            Arc::new(move |x: &Point<S>| linalg::add(&linalg::matvec(&a, x.coords()), &b)),
        ))
    }

    /// `M x + b - θ grad h(x)` on `R^n` with `M` positive semidefinite, which is
    /// θ-undermonotone with respect to `h`.
    pub fn undermonotone(
        manifold: Manifold,
        m: Vec<Vec<S>>,
        b: Vec<S>,
        theta: S,
        bregman: &BregmanFunction<S>,
    ) -> Result<Self> {
        if !(theta >= S::zero()) {
            return Err(Error::Parameter("theta must be nonnegative".into()));
        }
        let base = Self::linear(manifold, m, b)?;
        let h = bregman.clone();
        Ok(Self::new(
            manifold,
            format!("undermonotone(θ={})", theta),
            Arc::new(move |x: &Point<S>| {
                let lin = (base.field)(x);
                match h.gradient(x) {
                    Ok(g) => linalg::axpy(-theta, g.components(), &lin),
                    Err(_) => vec![S::nan(); lin.len()],
                }
            }),
        ))
    }

    /// Gradient field of `Σ d(·, a_i)`; monotone on a Hadamard manifold.
    pub fn median(manifold: Manifold, anchors: Vec<Point<S>>) -> Self {
        Self::new(manifold, "median", median_field(manifold, anchors))
    }

    /// `x / (1 + |x|²)` on `R^n`: pseudomonotone but not monotone.
    pub fn scaled_identity(manifold: Manifold) -> Result<Self> {
        require_euclidean(&manifold, "scaled identity")?;
        Ok(Self::new(
            manifold,
            "scaled_identity",
            Arc::new(|x: &Point<S>| {
                let g = S::one() / (S::one() + linalg::dot(x.coords(), x.coords()));
                linalg::scale(x.coords(), g)
            }),
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn eval(&self, x: &Point<S>) -> TangentVector<S> {
        self.manifold.project_tangent(x, (self.field)(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::gradient_fd_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_value_and_gradient() {
        let m = Manifold::euclidean(2);
        let phi = ScalarField::quadratic(m, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let x = m.point(vec![0.0, 3.0]).unwrap();
        assert_eq!(phi.value(&x), 5.0);
        assert_eq!(phi.gradient(&x).components(), &[-2.0, 4.0]);
        assert!(ScalarField::<f64>::quadratic(Manifold::hyperboloid(2), vec![0.0; 3], vec![1.0; 3]).is_err());
        assert!(ScalarField::quadratic(m, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = Manifold::hyperboloid(2);
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let anchors: Vec<Point<f64>> = (0..3).map(|_| h.random_point(&mut r, &h.origin(), 1.5)).collect();
        let fields = [
            ScalarField::squared_distance(h, anchors[0].clone()),
            ScalarField::sum_of_distances(h, anchors.clone()),
        ];
        for phi in &fields {
            for _ in 0..20 {
                let x = h.random_point(&mut r, &h.origin(), 2.0);
                let g = phi.gradient(&x);
                let err = gradient_fd_error(&h, &x, &g, |p| Ok(phi.value(p))).unwrap();
                assert!(err < 1e-6, "{} {err}", phi.label());
            }
        }
    }

    #[test]
    fn linear_field_applies_matrix() {
        let m = Manifold::euclidean(2);
        let v = VectorField::linear(m, vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![1.0, -1.0]).unwrap();
        let x = m.point(vec![1.0, 1.0]).unwrap();
        assert_eq!(v.eval(&x).components(), &[4.0, 0.0]);
    }

    #[test]
    fn median_field_ignores_coincident_anchor() {
        let m = Manifold::euclidean(2);
        let a = m.point(vec![0.0, 0.0]).unwrap();
        let b = m.point(vec![2.0, 0.0]).unwrap();
        let v = VectorField::median(m, vec![a.clone(), b]);
        assert_eq!(v.eval(&a).components(), &[-1.0, 0.0]);
    }
}
