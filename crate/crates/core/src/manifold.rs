//! Hadamard manifold primitives.
//!
//! Two backends share one contract: Euclidean space `R^n` and the hyperboloid
//! (Lorentz) model of hyperbolic space `H^n`, embedded in `R^{n+1}` as the
//! upper sheet of `<x, x>_L = -1` with `<x, y>_L = -x0*y0 + sum_i xi*yi`.
//!
//! Every operation is a pure function of its inputs. Points produced by `exp`
//! are re-projected onto the hyperboloid and tangent vectors produced by `log`
//! and parallel transport are re-orthogonalized against their base point, so
//! long chains of calls do not drift off the model.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Backend tag, spelled `"euclidean"` or `"hyperboloid"` in configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Euclidean,
    Hyperboloid,
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "hyperboloid" => Ok(Self::Hyperboloid),
            other => Err(Error::Configuration(format!(
                "unknown manifold `{other}` (expected `euclidean` or `hyperboloid`)"
            ))),
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean => f.write_str("euclidean"),
            Self::Hyperboloid => f.write_str("hyperboloid"),
        }
    }
}

/// A point in ambient coordinates (`n` for Euclidean, `n + 1` for the hyperboloid).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point<S> {
    coords: Vec<S>,
}

impl<S: Scalar> Point<S> {
    pub(crate) fn from_raw(coords: Vec<S>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<S> {
        self.coords
    }

    fn approx_eq(&self, other: &Self) -> bool {
        if self.coords.len() != other.coords.len() {
            return false;
        }
        let scale = S::one() + linalg::max_abs(&self.coords);
        self.coords
            .iter()
            .zip(&other.coords)
            .all(|(&a, &b)| (a - b).abs() <= S::constraint_tol() * scale)
    }
}

/// A tangent vector, stored with the point it is anchored at.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentVector<S> {
    base: Point<S>,
    components: Vec<S>,
}

impl<S: Scalar> TangentVector<S> {
    pub(crate) fn from_raw(base: Point<S>, components: Vec<S>) -> Self {
        Self { base, components }
    }

    pub fn base(&self) -> &Point<S> {
        &self.base
    }

    pub fn components(&self) -> &[S] {
        &self.components
    }

    pub fn scaled(&self, s: S) -> Self {
        Self::from_raw(self.base.clone(), linalg::scale(&self.components, s))
    }

    /// `self + a * other`; both vectors must share a base point.
    pub fn add_scaled(&self, a: S, other: &Self) -> Result<Self> {
        if !self.base.approx_eq(&other.base) {
            return Err(Error::BaseMismatch);
        }
        Ok(Self::from_raw(
            self.base.clone(),
            linalg::axpy(a, &other.components, &self.components),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(S::one(), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-S::one(), other)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }
}

/// Per-labeling slacks of the Hadamard law-of-cosines comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport<S> {
    /// `d²(x_i, x_{i+1}) - [d²(x_{i+1}, x_{i+2}) + d²(x_{i+2}, x_i) - 2<log_{x_{i+2}} x_{i+1}, log_{x_{i+2}} x_i>]`
    /// for the three cyclic labelings.
    pub cosine_slacks: [S; 3],
    /// `½d²(x,z) - ½d²(y,z) + <log_y z, log_y x> - ½d²(x,y)` with `x = x1`, `z = x2`, `y = x3`.
    pub energy_slack: S,
    /// Two or more vertices coincide.
    pub degenerate: bool,
}

impl<S: Scalar> ComparisonReport<S> {
    pub fn min_slack(&self) -> S {
        self.cosine_slacks
            .iter()
            .fold(self.energy_slack, |m, &s| m.min(s))
    }
}

/// A Hadamard manifold backend of fixed dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Manifold {
    kind: ManifoldKind,
    dim: usize,
}

impl Manifold {
    pub fn new(kind: ManifoldKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("manifold dimension must be positive".into()));
        }
        Ok(Self { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(ManifoldKind::Euclidean, dim).expect("positive dimension")
    }

    pub fn hyperboloid(dim: usize) -> Self {
        Self::new(ManifoldKind::Hyperboloid, dim).expect("positive dimension")
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the coordinate vectors of points and tangent vectors.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean => self.dim,
            ManifoldKind::Hyperboloid => self.dim + 1,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// The backend's bilinear form on ambient vectors.
    fn form<S: Scalar>(&self, a: &[S], b: &[S]) -> S {
        match self.kind {
            ManifoldKind::Euclidean => linalg::dot(a, b),
            ManifoldKind::Hyperboloid => minkowski(a, b),
        }
    }

    /// Validates ambient coordinates as a point of this manifold.
    pub fn point<S: Scalar>(&self, coords: Vec<S>) -> Result<Point<S>> {
        self.check_len(coords.len())?;
        if !linalg::all_finite(&coords) {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        if self.kind == ManifoldKind::Hyperboloid {
            if coords[0] <= S::zero() {
                return Err(Error::InvalidPoint("hyperboloid point needs x0 > 0".into()));
            }
            let residual = (minkowski(&coords, &coords) + S::one()).abs();
            let scale = S::one().max(coords[0] * coords[0]);
            if residual > S::constraint_tol() * scale {
                return Err(Error::InvalidPoint(format!(
                    "<x,x>_L = -1 violated by {residual}"
                )));
            }
        }
        Ok(Point::from_raw(coords))
    }

    /// Builds a point from `n` intrinsic coordinates. For the hyperboloid these are
    /// the spatial components and `x0 = sqrt(1 + |x|²)` is filled in.
    pub fn lift<S: Scalar>(&self, intrinsic: &[S]) -> Result<Point<S>> {
        if intrinsic.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: intrinsic.len(),
            });
        }
        if !linalg::all_finite(intrinsic) {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        match self.kind {
            ManifoldKind::Euclidean => Ok(Point::from_raw(intrinsic.to_vec())),
            ManifoldKind::Hyperboloid => {
                let mut coords = Vec::with_capacity(self.dim + 1);
                coords.push((S::one() + linalg::dot(intrinsic, intrinsic)).sqrt());
                coords.extend_from_slice(intrinsic);
                Ok(Point::from_raw(coords))
            }
        }
    }

    /// Inverse of [`Manifold::lift`].
    pub fn intrinsic<'a, S: Scalar>(&self, x: &'a Point<S>) -> &'a [S] {
        match self.kind {
            ManifoldKind::Euclidean => x.coords(),
            ManifoldKind::Hyperboloid => &x.coords()[1..],
        }
    }

    /// The origin of `R^n`, or the apex `(1, 0, …, 0)` of the hyperboloid.
    pub fn origin<S: Scalar>(&self) -> Point<S> {
        let mut coords = vec![S::zero(); self.ambient_dim()];
        if self.kind == ManifoldKind::Hyperboloid {
            coords[0] = S::one();
        }
        Point::from_raw(coords)
    }

    /// Validates `components` as a tangent vector at `base`.
    pub fn tangent<S: Scalar>(&self, base: &Point<S>, components: Vec<S>) -> Result<TangentVector<S>> {
        self.check_len(base.coords().len())?;
        self.check_len(components.len())?;
        if !linalg::all_finite(&components) {
            return Err(Error::NonFinite("tangent components".into()));
        }
        if self.kind == ManifoldKind::Hyperboloid {
            let residual = minkowski(base.coords(), &components).abs();
            let scale = S::one().max(linalg::max_abs(base.coords()) * linalg::max_abs(&components));
            if residual > S::constraint_tol() * scale {
                return Err(Error::InvalidTangent(format!(
                    "<x,v>_L = {residual}, expected 0"
                )));
            }
        }
        Ok(TangentVector::from_raw(base.clone(), components))
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `base`.
    pub fn project_tangent<S: Scalar>(&self, base: &Point<S>, ambient: Vec<S>) -> TangentVector<S> {
        match self.kind {
            ManifoldKind::Euclidean => TangentVector::from_raw(base.clone(), ambient),
            ManifoldKind::Hyperboloid => {
                let c = minkowski(base.coords(), &ambient);
                let comps = linalg::axpy(c, base.coords(), &ambient);
                TangentVector::from_raw(base.clone(), comps)
            }
        }
    }

    pub fn zero_tangent<S: Scalar>(&self, base: &Point<S>) -> TangentVector<S> {
        TangentVector::from_raw(base.clone(), vec![S::zero(); self.ambient_dim()])
    }

    /// Riemannian metric at `x`.
    pub fn inner<S: Scalar>(&self, x: &Point<S>, u: &TangentVector<S>, v: &TangentVector<S>) -> Result<S> {
        if !u.base.approx_eq(x) || !v.base.approx_eq(x) {
            return Err(Error::BaseMismatch);
        }
        self.check_len(u.components.len())?;
        self.check_len(v.components.len())?;
        Ok(self.form(&u.components, &v.components))
    }

    /// Metric pairing of two vectors whose common base is implied.
    pub(crate) fn pair<S: Scalar>(&self, u: &TangentVector<S>, v: &TangentVector<S>) -> S {
        self.form(&u.components, &v.components)
    }

    pub fn norm<S: Scalar>(&self, v: &TangentVector<S>) -> S {
        self.form(&v.components, &v.components).max(S::zero()).sqrt()
    }

    /// Exponential map `exp_x v`.
    pub fn exp<S: Scalar>(&self, x: &Point<S>, v: &TangentVector<S>) -> Result<Point<S>> {
        self.check_len(x.coords().len())?;
        self.check_len(v.components.len())?;
        if !linalg::all_finite(&v.components) || !linalg::all_finite(x.coords()) {
            return Err(Error::NonFinite("exp input".into()));
        }
        match self.kind {
            ManifoldKind::Euclidean => Ok(Point::from_raw(linalg::add(x.coords(), &v.components))),
            ManifoldKind::Hyperboloid => {
                // re-orthogonalize before stepping
                let v = self.project_tangent(x, v.components.clone());
                let n = self.norm(&v);
                let (c, s) = if n < S::small_norm() {
                    let n2 = n * n;
                    (S::one() + n2 * S::half(), S::one() + n2 / S::lit(6.0))
                } else {
                    (n.cosh(), n.sinh() / n)
                };
                let y = linalg::axpy(s, &v.components, &linalg::scale(x.coords(), c));
                let y = reproject(y);
                if !linalg::all_finite(&y) {
                    return Err(Error::NonFinite("exp overflowed".into()));
                }
                Ok(Point::from_raw(y))
            }
        }
    }

    /// Inverse exponential map `exp_x^{-1} y`.
    pub fn log<S: Scalar>(&self, x: &Point<S>, y: &Point<S>) -> Result<TangentVector<S>> {
        self.check_len(x.coords().len())?;
        self.check_len(y.coords().len())?;
        match self.kind {
            ManifoldKind::Euclidean => Ok(TangentVector::from_raw(
                x.clone(),
                linalg::sub(y.coords(), x.coords()),
            )),
            ManifoldKind::Hyperboloid => {
                let (d, a) = hyperbolic_distance(x.coords(), y.coords());
                if d.is_zero() {
                    return Ok(self.zero_tangent(x));
                }
                let u = linalg::axpy(-a, x.coords(), y.coords());
                let u = self.project_tangent(x, u);
                Ok(u.scaled(d_over_sinh(d)))
            }
        }
    }

    /// Geodesic distance.
    pub fn dist<S: Scalar>(&self, x: &Point<S>, y: &Point<S>) -> Result<S> {
        self.check_len(x.coords().len())?;
        self.check_len(y.coords().len())?;
        Ok(match self.kind {
            ManifoldKind::Euclidean => linalg::norm(&linalg::sub(x.coords(), y.coords())),
            ManifoldKind::Hyperboloid => hyperbolic_distance(x.coords(), y.coords()).0,
        })
    }

    /// Parallel transport of `v ∈ T_x M` to `T_y M` along the geodesic from `x` to `y`.
    pub fn parallel_transport<S: Scalar>(
        &self,
        x: &Point<S>,
        y: &Point<S>,
        v: &TangentVector<S>,
    ) -> Result<TangentVector<S>> {
        self.check_len(y.coords().len())?;
        if !v.base.approx_eq(x) {
            return Err(Error::BaseMismatch);
        }
        match self.kind {
            ManifoldKind::Euclidean => Ok(TangentVector::from_raw(y.clone(), v.components.clone())),
            ManifoldKind::Hyperboloid => {
                // P(v) = v + <y, v>_L / (1 - <x, y>_L) (x + y)
                let a = -minkowski(x.coords(), y.coords());
                let c = minkowski(y.coords(), &v.components) / (S::one() + a.max(S::one()));
                let xy = linalg::add(x.coords(), y.coords());
                let w = linalg::axpy(c, &xy, &v.components);
                Ok(self.project_tangent(y, w))
            }
        }
    }

    /// Point at parameter `t ∈ [0, 1]` of the geodesic segment from `x` to `y`.
    pub fn geodesic_point<S: Scalar>(&self, x: &Point<S>, y: &Point<S>, t: S) -> Result<Point<S>> {
        if !(t >= S::zero() && t <= S::one()) {
            return Err(Error::OutOfRange(format!("geodesic parameter {t} outside [0, 1]")));
        }
        if t.is_zero() {
            return Ok(x.clone());
        }
        if t == S::one() {
            return Ok(y.clone());
        }
        let v = self.log(x, y)?;
        self.exp(x, &v.scaled(t))
    }

    /// Riemannian gradient at `x` of `p ↦ <g, exp_y^{-1} p>` for a fixed `g ∈ T_y M`.
    ///
    /// This is the adjoint of the differential of `exp_y^{-1}` at `x`. With
    /// `v = exp_y^{-1} x`, `r = |v|` and `g = g_par + g_perp` split along `v`,
    /// the result is `P(g_par) + (r / sinh r) P(g_perp)` on the hyperboloid
    /// (Jacobi fields in curvature -1) and plain `P(g)` in flat space.
    pub fn log_pullback<S: Scalar>(
        &self,
        y: &Point<S>,
        x: &Point<S>,
        g: &TangentVector<S>,
    ) -> Result<TangentVector<S>> {
        match self.kind {
            ManifoldKind::Euclidean => self.parallel_transport(y, x, g),
            ManifoldKind::Hyperboloid => {
                let v = self.log(y, x)?;
                let r = self.norm(&v);
                if r < S::small_norm() {
                    return self.parallel_transport(y, x, g);
                }
                let par = v.scaled(self.pair(g, &v) / (r * r));
                let perp = g.sub(&par)?;
                let par_t = self.parallel_transport(y, x, &par)?;
                let perp_t = self.parallel_transport(y, x, &perp)?;
                par_t.add_scaled(d_over_sinh(r), &perp_t)
            }
        }
    }

    /// Evaluates the comparison inequalities for a geodesic triangle.
    pub fn check_comparison_inequalities<S: Scalar>(
        &self,
        x1: &Point<S>,
        x2: &Point<S>,
        x3: &Point<S>,
    ) -> Result<ComparisonReport<S>> {
        let pts = [x1, x2, x3];
        let tiny = S::constraint_tol();
        let d12 = self.dist(x1, x2)?;
        let d23 = self.dist(x2, x3)?;
        let d31 = self.dist(x3, x1)?;
        let degenerate = d12 <= tiny || d23 <= tiny || d31 <= tiny;

        let mut cosine_slacks = [S::zero(); 3];
        for (i, slack) in cosine_slacks.iter_mut().enumerate() {
            let a = pts[i];
            let b = pts[(i + 1) % 3];
            let c = pts[(i + 2) % 3];
            let cb = self.log(c, b)?;
            let ca = self.log(c, a)?;
            let dbc = self.dist(b, c)?;
            let dca = self.dist(c, a)?;
            let dab = self.dist(a, b)?;
            let lhs = dbc * dbc + dca * dca - S::two() * self.pair(&cb, &ca);
            *slack = dab * dab - lhs;
        }

        let (x, z, y) = (x1, x2, x3);
        let dxz = self.dist(x, z)?;
        let dyz = self.dist(y, z)?;
        let dxy = self.dist(x, y)?;
        let yz = self.log(y, z)?;
        let yx = self.log(y, x)?;
        let energy_slack = S::half() * dxz * dxz - S::half() * dyz * dyz + self.pair(&yz, &yx)
            - S::half() * dxy * dxy;

        Ok(ComparisonReport {
            cosine_slacks,
            energy_slack,
            degenerate,
        })
    }

    /// Orthonormal basis of `T_x M`.
    pub fn tangent_basis<S: Scalar>(&self, x: &Point<S>) -> Vec<TangentVector<S>> {
        let amb = self.ambient_dim();
        let offset = amb - self.dim;
        let mut basis: Vec<TangentVector<S>> = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut e = vec![S::zero(); amb];
            e[i + offset] = S::one();
            let mut t = self.project_tangent(x, e);
            for b in &basis {
                let c = self.pair(b, &t);
                t = TangentVector::from_raw(x.clone(), linalg::axpy(-c, &b.components, &t.components));
            }
            let n = self.norm(&t);
            basis.push(t.scaled(S::one() / n));
        }
        basis
    }

    /// Random tangent vector at `base` with uniformly random direction and norm `length`.
    pub fn random_direction<S: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        base: &Point<S>,
        length: S,
    ) -> TangentVector<S> {
        let basis = self.tangent_basis(base);
        loop {
            let weights: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
            let n: f64 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            if n < 1e-12 {
                continue;
            }
            let mut comps = vec![S::zero(); self.ambient_dim()];
            for (w, b) in weights.iter().zip(&basis) {
                comps = linalg::axpy(S::lit(w / n), &b.components, &comps);
            }
            return TangentVector::from_raw(base.clone(), linalg::scale(&comps, length));
        }
    }

    /// Random point in the closed geodesic ball `B(center, radius)`.
    pub fn random_point<S: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        center: &Point<S>,
        radius: S,
    ) -> Point<S> {
        let u: f64 = rng.gen();
        let r = radius * S::lit(u.powf(1.0 / self.dim as f64));
        let v = self.random_direction(rng, center, r);
        self.exp(center, &v).expect("finite random step")
    }
}

#[inline]
fn minkowski<S: Scalar>(a: &[S], b: &[S]) -> S {
    -a[0] * b[0] + linalg::dot(&a[1..], &b[1..])
}

/// Rescales onto the hyperboloid by recomputing `x0` from the spatial part.
fn reproject<S: Scalar>(mut y: Vec<S>) -> Vec<S> {
    let spatial = linalg::dot(&y[1..], &y[1..]);
    y[0] = (S::one() + spatial).sqrt();
    y
}

/// Returns `(d, a)` with `d` the hyperbolic distance and `a = cosh d = -<x,y>_L`.
///
/// `d` comes from the chordal Minkowski norm `|y - x|_L = 2 sinh(d/2)`, clamped
/// at zero, which stays accurate for nearby points where `arcosh(a)` does not.
fn hyperbolic_distance<S: Scalar>(x: &[S], y: &[S]) -> (S, S) {
    let w = linalg::sub(y, x);
    let m = minkowski(&w, &w).max(S::zero());
    let d = S::two() * (m.sqrt() * S::half()).asinh();
    (d, S::one() + m * S::half())
}

/// `r / sinh r` with a series branch near zero.
fn d_over_sinh<S: Scalar>(r: S) -> S {
    if r < S::small_norm() {
        S::one() - r * r / S::lit(6.0)
    } else {
        r / r.sinh()
    }
}
