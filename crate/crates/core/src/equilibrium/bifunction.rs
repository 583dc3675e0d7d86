//! Bifunctions `K: Ω × Ω → R` and the regularized bifunction of each outer step.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::fields::{ScalarField, VectorField};
use crate::bregman::BregmanFunction;
use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, TangentVector};
use crate::scalar::Scalar;

pub type BiFn<S> = Arc<dyn Fn(&Point<S>, &Point<S>) -> S + Send + Sync>;
/// Gradient of `y ↦ K(x, y)` at `y`, in ambient coordinates.
pub type BiGradFn<S> = Arc<dyn Fn(&Point<S>, &Point<S>) -> Vec<S> + Send + Sync>;

/// Declared monotonicity class of a bifunction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", content = "theta", rename_all = "snake_case")]
pub enum MonotonicityClass {
    Monotone,
    Pseudomonotone,
    Undermonotone(f64),
    Unknown,
}

/// Ingredients of `L(x,y) = F(x,y) + μ Q(x,y) + λ <grad D_h(x, z), exp_x^{-1} y>`.
#[derive(Clone, Debug)]
pub struct Regularized<S: Scalar> {
    pub f: Bifunction<S>,
    pub q: Bifunction<S>,
    pub mu: S,
    pub lambda: S,
    pub anchor: Point<S>,
    pub bregman: BregmanFunction<S>,
}

#[derive(Clone)]
pub(crate) enum Kind<S: Scalar> {
    Zero,
    Minimization(ScalarField<S>),
    Variational(VectorField<S>),
    Regularized(Box<Regularized<S>>),
    Custom { eval: BiFn<S>, grad_second: Option<BiGradFn<S>> },
}

#[derive(Clone)]
pub struct Bifunction<S: Scalar> {
    manifold: Manifold,
    kind: Kind<S>,
    declared: MonotonicityClass,
    label: String,
}

impl<S: Scalar> fmt::Debug for Bifunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bifunction")
            .field("label", &self.label)
            .field("declared", &self.declared)
            .finish()
    }
}

impl<S: Scalar> Bifunction<S> {
    /// `K ≡ 0`.
    pub fn zero(manifold: Manifold) -> Self {
        Self {
            manifold,
            kind: Kind::Zero,
            declared: MonotonicityClass::Monotone,
            label: "zero".into(),
        }
    }

    /// `K(x, y) = φ(y) - φ(x)`, so that `EP(K, Ω)` is the set of minimizers of `φ` on `Ω`.
    pub fn minimization(phi: ScalarField<S>) -> Self {
        Self {
            manifold: *phi.manifold(),
            label: format!("min {}", phi.label()),
            kind: Kind::Minimization(phi),
            declared: MonotonicityClass::Monotone,
        }
    }

    /// `K(x, y) = <V(x), exp_x^{-1} y>`.
    pub fn variational(field: VectorField<S>) -> Self {
        Self {
            manifold: field.manifold(),
            label: format!("vi {}", field.label()),
            kind: Kind::Variational(field),
            declared: MonotonicityClass::Unknown,
        }
    }

    pub fn custom(
        manifold: Manifold,
        label: impl Into<String>,
        eval: BiFn<S>,
        grad_second: Option<BiGradFn<S>>,
    ) -> Self {
        Self {
            manifold,
            kind: Kind::Custom { eval, grad_second },
            declared: MonotonicityClass::Unknown,
            label: label.into(),
        }
    }

    /// The regularized bifunction `L_{μ,λ,z}` built from `F`, `Q` and the Bregman function `b`.
    pub fn regularized(
        f: &Bifunction<S>,
        q: &Bifunction<S>,
        mu: S,
        lambda: S,
        z: Point<S>,
        b: &BregmanFunction<S>,
    ) -> Result<Self> {
        if !(mu > S::zero()) || !mu.is_finite() {
            return Err(Error::Parameter(format!("mu must be positive, got {mu}")));
        }
        if !(lambda > S::zero()) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
        }
        if !b.zone().contains(&z) {
            return Err(Error::Zone("regularization center is outside the zone".into()));
        }
        Ok(Self {
            manifold: f.manifold,
            label: format!("L[{}, {}]", f.label, q.label),
            kind: Kind::Regularized(Box::new(Regularized {
                f: f.clone(),
                q: q.clone(),
                mu,
                lambda,
                anchor: z,
                bregman: b.clone(),
            })),
            declared: MonotonicityClass::Unknown,
        })
    }

    /// Overrides the declared class.
    pub fn with_class(mut self, class: MonotonicityClass) -> Self {
        self.declared = class;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn declared_class(&self) -> MonotonicityClass {
        self.declared
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// `φ` when this is a minimization-type bifunction.
    pub fn objective(&self) -> Option<&ScalarField<S>> {
        match &self.kind {
            Kind::Minimization(phi) => Some(phi),
            _ => None,
        }
    }

    pub fn is_variational(&self) -> bool {
        matches!(self.kind, Kind::Variational(_))
    }

    pub fn regularization(&self) -> Option<&Regularized<S>> {
        match &self.kind {
            Kind::Regularized(r) => Some(r),
            _ => None,
        }
    }

    /// Whether `grad_second` is available.
    pub fn has_gradient(&self) -> bool {
        match &self.kind {
            Kind::Custom { grad_second, .. } => grad_second.is_some(),
            Kind::Regularized(r) => r.f.has_gradient() && r.q.has_gradient(),
            _ => true,
        }
    }

    pub fn eval(&self, x: &Point<S>, y: &Point<S>) -> Result<S> {
        let m = &self.manifold;
        match &self.kind {
            Kind::Zero => Ok(S::zero()),
            Kind::Minimization(phi) => Ok(phi.value(y) - phi.value(x)),
            Kind::Variational(v) => Ok(m.pair(&v.eval(x), &m.log(x, y)?)),
            Kind::Regularized(r) => {
                let g = r.bregman.grad_bregman_first(x, &r.anchor)?;
                let reg = m.pair(&g, &m.log(x, y)?);
                Ok(r.f.eval(x, y)? + r.mu * r.q.eval(x, y)? + r.lambda * reg)
            }
            Kind::Custom { eval, .. } => Ok(eval(x, y)),
        }
    }

    /// Riemannian gradient of `y ↦ K(x, y)` at `y`.
    pub fn grad_second(&self, x: &Point<S>, y: &Point<S>) -> Result<TangentVector<S>> {
        let m = &self.manifold;
        match &self.kind {
            Kind::Zero => Ok(m.zero_tangent(y)),
            Kind::Minimization(phi) => Ok(phi.gradient(y)),
            Kind::Variational(v) => m.log_pullback(x, y, &v.eval(x)),
            Kind::Regularized(r) => {
                let g = r.bregman.grad_bregman_first(x, &r.anchor)?;
                let reg = m.log_pullback(x, y, &g)?;
                r.f.grad_second(x, y)?
                    .add_scaled(r.mu, &r.q.grad_second(x, y)?)?
                    .add_scaled(r.lambda, &reg)
            }
            Kind::Custom { grad_second, .. } => match grad_second {
                Some(g) => Ok(m.project_tangent(y, g(x, y))),
                None => Err(Error::Configuration(format!(
                    "bifunction `{}` has no gradient oracle",
                    self.label
                ))),
            },
        }
    }

    /// The operator `x ↦ grad_y K(x, y)|_{y=x}`; `V` for VI-type and `grad φ` for minimization-type.
    pub fn operator(&self, x: &Point<S>) -> Result<TangentVector<S>> {
        self.grad_second(x, x)
    }
}

/// `K(x, y) = φ(y) - φ(x)` from a value and a gradient oracle.
pub fn make_minimization_bifunction<S: Scalar>(
    manifold: Manifold,
    phi: crate::bregman::ScalarFn<S>,
    grad_phi: crate::bregman::GradientFn<S>,
) -> Bifunction<S> {
    Bifunction::minimization(ScalarField::new(manifold, "phi", phi, grad_phi))
}

/// `K(x, y) = <V(x), exp_x^{-1} y>`.
pub fn make_vi_bifunction<S: Scalar>(field: VectorField<S>) -> Bifunction<S> {
    Bifunction::variational(field)
}

/// See [`Bifunction::regularized`].
pub fn regularized_bifunction<S: Scalar>(
    f: &Bifunction<S>,
    q: &Bifunction<S>,
    mu: S,
    lambda: S,
    z: Point<S>,
    b: &BregmanFunction<S>,
) -> Result<Bifunction<S>> {
    Bifunction::regularized(f, q, mu, lambda, z, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::gradient_fd_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm_sq(m: Manifold) -> ScalarField<f64> {
        ScalarField::quadratic(m, vec![0.0; m.dim()], vec![1.0; m.dim()]).unwrap()
    }

    #[test]
    fn minimization_sign_and_diagonal() {
        let m = Manifold::euclidean(2);
        let k = Bifunction::minimization(norm_sq(m));
        let x = m.point(vec![1.0, 0.0]).unwrap();
        let y = m.origin();
        assert_eq!(k.eval(&x, &y).unwrap(), -1.0);
        assert_eq!(k.eval(&x, &x).unwrap(), 0.0);
        assert_eq!(k.declared_class(), MonotonicityClass::Monotone);
    }

    #[test]
    fn vi_examples() {
        let m = Manifold::euclidean(2);
        let id = VectorField::new(m, "id", Arc::new(|x: &Point<f64>| x.coords().to_vec()));
        let k = make_vi_bifunction(id);
        let x = m.point(vec![1.0, 0.0]).unwrap();
        let y = m.point(vec![1.0, 1.0]).unwrap();
        assert_eq!(k.eval(&x, &y).unwrap(), 0.0);
        let zero = make_vi_bifunction(VectorField::new(m, "0", Arc::new(|_: &Point<f64>| vec![0.0, 0.0])));
        assert_eq!(zero.eval(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn vi_is_linear_along_geodesics_from_x() {
        let h = Manifold::hyperboloid(2);
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let anchors = (0..3).map(|_| h.random_point(&mut r, &h.origin(), 1.0)).collect();
        let k = Bifunction::variational(VectorField::median(h, anchors));
        for _ in 0..50 {
            let x = h.random_point(&mut r, &h.origin(), 2.0);
            let y = h.random_point(&mut r, &h.origin(), 2.0);
            let t: f64 = r.gen_range(0.0..1.0);
            let kt = k.eval(&x, &h.geodesic_point(&x, &y, t).unwrap()).unwrap();
            assert!((kt - t * k.eval(&x, &y).unwrap()).abs() <= 1e-8);
            assert!(k.eval(&x, &x).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn regularized_flat_term_and_center() {
        let m = Manifold::euclidean(2);
        let b = BregmanFunction::<f64>::squared_norm(m).unwrap();
        let zero = Bifunction::zero(m);
        let z = m.point(vec![2.0, 0.0]).unwrap();
        let l = Bifunction::regularized(&zero, &zero, 1.0, 3.0, z.clone(), &b).unwrap();
        let x = m.point(vec![1.0, 1.0]).unwrap();
        let y = m.point(vec![0.0, 2.0]).unwrap();
        // 3 <x - z, y - x> = 3 * ((-1)(-1) + (1)(1))
        assert!((l.eval(&x, &y).unwrap() - 6.0).abs() < 1e-14);
        assert_eq!(l.eval(&x, &x).unwrap(), 0.0);
        let f = Bifunction::minimization(norm_sq(m));
        let lz = Bifunction::regularized(&f, &zero, 0.5, 3.0, z.clone(), &b).unwrap();
        assert!((lz.eval(&z, &y).unwrap() - f.eval(&z, &y).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn regularized_rejects_bad_parameters() {
        let m = Manifold::euclidean(1);
        let b = BregmanFunction::<f64>::squared_norm(m).unwrap();
        let zero = Bifunction::zero(m);
        for (mu, lambda) in [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, f64::NAN)] {
            let err = Bifunction::regularized(&zero, &zero, mu, lambda, m.origin(), &b).unwrap_err();
            assert!(matches!(err, Error::Parameter(_)));
        }
    }

    #[test]
    fn grad_second_matches_finite_differences() {
        let h = Manifold::hyperboloid(2);
        let mut r = ChaCha8Rng::seed_from_u64(21);
        let anchors: Vec<_> = (0..3).map(|_| h.random_point(&mut r, &h.origin(), 1.0)).collect();
        let f = Bifunction::variational(VectorField::median(h, anchors.clone()));
        let q = Bifunction::minimization(ScalarField::squared_distance(h, anchors[0].clone()));
        let b = BregmanFunction::energy(h, h.origin());
        let z = h.random_point(&mut r, &h.origin(), 1.0);
        let l = Bifunction::regularized(&f, &q, 0.3, 2.0, z, &b).unwrap();
        for k in [&f, &q, &l] {
            for _ in 0..20 {
                let x = h.random_point(&mut r, &h.origin(), 1.5);
                let y = h.random_point(&mut r, &h.origin(), 1.5);
                let g = k.grad_second(&x, &y).unwrap();
                let err = gradient_fd_error(&h, &y, &g, |p| k.eval(&x, p)).unwrap();
                assert!(err < 1e-6, "{} {err}", k.label());
            }
        }
    }

    #[test]
    fn custom_without_gradient_reports_configuration_error() {
        let m = Manifold::euclidean(1);
        let k = Bifunction::custom(m, "c", Arc::new(|_: &Point<f64>, _: &Point<f64>| 0.0), None);
        assert!(!k.has_gradient());
        assert!(matches!(k.grad_second(&m.origin(), &m.origin()), Err(Error::Configuration(_))));
    }

}
