//! Bregman functions and the divergences they induce on a Hadamard manifold.
//!
//! `D_h(x, y) = h(x) - h(y) - <grad h(y), exp_y^{-1} x>` for `x` in the closure
//! of the zone `S` and `y` in `S`.
//!
//! The gradient of `D_h(·, y)` reduces to `grad h(x) - P_{y→x} grad h(y)` in flat
//! space. On the hyperboloid the differential of `exp_y^{-1}` is not a parallel
//! transport, so [`BregmanFunction::grad_bregman_first`] uses the Jacobi-field
//! correction from [`Manifold::log_pullback`]. It then agrees with finite
//! differences of `D_h(·, y)` on both backends.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{Manifold, ManifoldKind, Point, TangentVector};
use crate::scalar::Scalar;

/// Scalar field on the manifold.
pub type ScalarFn<S> = Arc<dyn Fn(&Point<S>) -> S + Send + Sync>;
/// Returns Riemannian gradient components (ambient coordinates) at a point.
pub type GradientFn<S> = Arc<dyn Fn(&Point<S>) -> Vec<S> + Send + Sync>;

/// Central finite-difference step used by every gradient check.
pub const FD_STEP: f64 = 1e-5;

/// Open convex zone `S` on which `h` is differentiable.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Zone<S> {
    Whole,
    /// `{x : x_i > margin}`; its closure is taken as `{x : x_i >= 0}`.
    PositiveOrthant { margin: S },
}

impl<S: Scalar> Zone<S> {
    /// Membership in the open zone `S` (with the interior margin).
    pub fn contains(&self, x: &Point<S>) -> bool {
        match self {
            Zone::Whole => true,
            Zone::PositiveOrthant { margin } => x.coords().iter().all(|&c| c > *margin),
        }
    }

    /// Membership in the closure of `S`.
    pub fn contains_closure(&self, x: &Point<S>) -> bool {
        match self {
            Zone::Whole => true,
            Zone::PositiveOrthant { .. } => x.coords().iter().all(|&c| c >= S::zero()),
        }
    }
}

#[derive(Clone)]
enum Kind<S: Scalar> {
    Energy { anchor: Point<S> },
    SquaredNorm,
    NegEntropy,
    Augmented { base: Arc<BregmanFunction<S>>, anchor: Point<S> },
    Custom { value: ScalarFn<S>, gradient: GradientFn<S> },
}

/// A Bregman function `h` with zone `S`.
#[derive(Clone)]
pub struct BregmanFunction<S: Scalar> {
    manifold: Manifold,
    zone: Zone<S>,
    kind: Kind<S>,
    label: String,
}

impl<S: Scalar> fmt::Debug for BregmanFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BregmanFunction")
            .field("label", &self.label)
            .field("manifold", &self.manifold)
            .field("zone", &self.zone)
            .finish()
    }
}

/// A Bregman distance together with its arguments.
#[derive(Clone, Debug, Serialize)]
pub struct BregmanDistanceValue<S> {
    pub value: S,
    pub x: Point<S>,
    pub y: Point<S>,
}

impl<S: Scalar> BregmanFunction<S> {
    /// Energy `h(x) = ½ d²(x, anchor)`, strictly convex on any Hadamard manifold.
    pub fn energy(manifold: Manifold, anchor: Point<S>) -> Self {
        Self {
            manifold,
            zone: Zone::Whole,
            kind: Kind::Energy { anchor },
            label: "energy".into(),
        }
    }

    /// `h(x) = ½|x|²` on `R^n`.
    pub fn squared_norm(manifold: Manifold) -> Result<Self> {
        require_euclidean(&manifold, "sqnorm")?;
        Ok(Self {
            manifold,
            zone: Zone::Whole,
            kind: Kind::SquaredNorm,
            label: "sqnorm".into(),
        })
    }

    /// `h(x) = Σ x_i ln x_i` on the positive orthant of `R^n`.
    pub fn negative_entropy(manifold: Manifold, margin: S) -> Result<Self> {
        require_euclidean(&manifold, "negentropy")?;
        if !(margin >= S::zero()) {
            return Err(Error::Parameter("zone margin must be nonnegative".into()));
        }
        Ok(Self {
            manifold,
            zone: Zone::PositiveOrthant { margin },
            kind: Kind::NegEntropy,
            label: "negentropy".into(),
        })
    }

    /// Wraps user-supplied `h` and `grad h` oracles.
    pub fn custom(
        manifold: Manifold,
        zone: Zone<S>,
        label: impl Into<String>,
        value: ScalarFn<S>,
        gradient: GradientFn<S>,
    ) -> Self {
        Self {
            manifold,
            zone,
            kind: Kind::Custom { value, gradient },
            label: label.into(),
        }
    }

    /// `h(x) = h0(x) + ½ d²(x, z)`. See [`coercive_augment`].
    pub fn augmented(&self, z: Point<S>) -> Self {
        Self {
            manifold: self.manifold,
            zone: self.zone.clone(),
            label: format!("augmented({})", self.label),
            kind: Kind::Augmented {
                base: Arc::new(self.clone()),
                anchor: z,
            },
        }
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn zone(&self) -> &Zone<S> {
        &self.zone
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn require_open(&self, x: &Point<S>, what: &str) -> Result<()> {
        if self.zone.contains(x) {
            Ok(())
        } else {
            Err(Error::Zone(format!("{what} is not in the zone of `{}`", self.label)))
        }
    }

    fn require_closure(&self, x: &Point<S>, what: &str) -> Result<()> {
        if self.zone.contains_closure(x) {
            Ok(())
        } else {
            Err(Error::Zone(format!(
                "{what} is outside the closure of the zone of `{}`",
                self.label
            )))
        }
    }

    /// `h(x)`; defined on the closure of the zone.
    pub fn value(&self, x: &Point<S>) -> Result<S> {
        self.require_closure(x, "x")?;
        self.value_unchecked(x)
    }

    fn value_unchecked(&self, x: &Point<S>) -> Result<S> {
        Ok(match &self.kind {
            Kind::Energy { anchor } => {
                let d = self.manifold.dist(x, anchor)?;
                S::half() * d * d
            }
            Kind::SquaredNorm => S::half() * x.coords().iter().map(|&c| c * c).sum::<S>(),
            Kind::NegEntropy => x
                .coords()
                .iter()
                .map(|&c| if c > S::zero() { c * c.ln() } else { S::zero() })
                .sum(),
            Kind::Augmented { base, anchor } => {
                let d = self.manifold.dist(x, anchor)?;
                base.value_unchecked(x)? + S::half() * d * d
            }
            Kind::Custom { value, .. } => value(x),
        })
    }

    /// `grad h(x)`; requires `x` in the open zone.
    pub fn gradient(&self, x: &Point<S>) -> Result<TangentVector<S>> {
        self.require_open(x, "x")?;
        self.gradient_unchecked(x)
    }

    fn gradient_unchecked(&self, x: &Point<S>) -> Result<TangentVector<S>> {
        let m = &self.manifold;
        match &self.kind {
            Kind::Energy { anchor } => Ok(m.log(x, anchor)?.scaled(-S::one())),
            Kind::SquaredNorm => Ok(m.project_tangent(x, x.coords().to_vec())),
            Kind::NegEntropy => {
                let comps = x.coords().iter().map(|&c| c.ln() + S::one()).collect();
                Ok(m.project_tangent(x, comps))
            }
            Kind::Augmented { base, anchor } => {
                let g0 = base.gradient_unchecked(x)?;
                g0.sub(&m.log(x, anchor)?)
            }
            Kind::Custom { gradient, .. } => Ok(m.project_tangent(x, gradient(x))),
        }
    }

    /// `D_h(x, y)` without the zone checks or the clamp at zero.
    pub(crate) fn raw_distance(&self, x: &Point<S>, y: &Point<S>) -> Result<S> {
        let gy = self.gradient_unchecked(y)?;
        let l = self.manifold.log(y, x)?;
        Ok(self.value_unchecked(x)? - self.value_unchecked(y)? - self.manifold.pair(&gy, &l))
    }

    /// `D_h(x, y)`, clamped at zero against roundoff.
    pub fn bregman_distance(&self, x: &Point<S>, y: &Point<S>) -> Result<BregmanDistanceValue<S>> {
        self.require_closure(x, "x")?;
        self.require_open(y, "y")?;
        let value = self.raw_distance(x, y)?.max(S::zero());
        Ok(BregmanDistanceValue {
            value,
            x: x.clone(),
            y: y.clone(),
        })
    }

    /// Shorthand for `bregman_distance(x, y)?.value`.
    pub fn divergence(&self, x: &Point<S>, y: &Point<S>) -> Result<S> {
        Ok(self.bregman_distance(x, y)?.value)
    }

    /// Gradient of `D_h(·, y)` at `x`.
    pub fn grad_bregman_first(&self, x: &Point<S>, y: &Point<S>) -> Result<TangentVector<S>> {
        self.require_open(x, "x")?;
        self.require_open(y, "y")?;
        let gx = self.gradient_unchecked(x)?;
        let gy = self.gradient_unchecked(y)?;
        let pulled = self.manifold.log_pullback(y, x, &gy)?;
        gx.sub(&pulled)
    }

    /// Residual of the three-point identity
    /// `<grad D_h(z, y), exp_z^{-1} x> = D_h(x, y) - D_h(x, z) - D_h(z, y)`.
    pub fn three_point(&self, x: &Point<S>, y: &Point<S>, z: &Point<S>) -> Result<S> {
        self.require_closure(x, "x")?;
        self.require_open(y, "y")?;
        self.require_open(z, "z")?;
        let g = self.grad_bregman_first(z, y)?;
        let lhs = self.manifold.pair(&g, &self.manifold.log(z, x)?);
        let rhs = self.raw_distance(x, y)? - self.raw_distance(x, z)? - self.raw_distance(z, y)?;
        Ok((lhs - rhs).abs())
    }

    /// `<-grad h(x) + P_{y→x} grad h(y), exp_x^{-1} y>`, the right-hand side of
    /// θ-undermonotonicity. Equals `D_h(x,y) + D_h(y,x)` in flat space.
    pub fn gradient_pairing(&self, x: &Point<S>, y: &Point<S>) -> Result<S> {
        let m = &self.manifold;
        let gx = self.gradient(x)?;
        let gy = m.parallel_transport(y, x, &self.gradient(y)?)?;
        let l = m.log(x, y)?;
        Ok(m.pair(&gy.sub(&gx)?, &l))
    }

    /// Random point of the zone within `radius` of the origin (orthant: a box).
    pub fn sample_zone<R: Rng + ?Sized>(&self, rng: &mut R, radius: S) -> Point<S> {
        match &self.zone {
            Zone::Whole => self
                .manifold
                .random_point(rng, &self.manifold.origin(), radius),
            Zone::PositiveOrthant { margin } => {
                let lo = margin.as_f64() + 0.05;
                let hi = lo.max(radius.as_f64());
                let coords = (0..self.manifold.ambient_dim())
                    .map(|_| S::lit(rng.gen_range(lo..=hi)))
                    .collect();
                Point::from_raw(coords)
            }
        }
    }

    /// Numerically probes the Bregman-function properties (a)–(f).
    pub fn validate<R: Rng + ?Sized>(&self, sample_budget: usize, rng: &mut R) -> ValidationReport {
        validate_bregman(self, sample_budget, rng)
    }
}

/// `h = h0 + ½ d²(·, z)`, whose divergence dominates `D_{h0} + ½ d²`.
pub fn coercive_augment<S: Scalar>(b0: &BregmanFunction<S>, z: Point<S>) -> BregmanFunction<S> {
    b0.augmented(z)
}

fn require_euclidean(m: &Manifold, name: &str) -> Result<()> {
    if m.kind() != ManifoldKind::Euclidean {
        return Err(Error::Configuration(format!(
            "bregman function `{name}` is only available on the euclidean backend"
        )));
    }
    Ok(())
}

/// Outcome of one clause of the Bregman-function validation.
#[derive(Clone, Debug, Serialize)]
pub struct ClauseResult {
    pub clause: char,
    pub property: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub label: String,
    pub clauses: Vec<ClauseResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, c: char) -> Option<&ClauseResult> {
        self.clauses.iter().find(|r| r.clause == c)
    }
}

const SAMPLE_RADIUS: f64 = 3.0;
const LEVEL_ALPHA: f64 = 10.0;
const RAY_LENGTH: f64 = 1e3;
// exp along a hyperboloid ray overflows f64 coordinates past roughly 350
const HYPERBOLOID_RAY_CAP: f64 = 300.0;

fn ray_cap(m: &Manifold) -> f64 {
    match m.kind() {
        ManifoldKind::Euclidean => RAY_LENGTH,
        ManifoldKind::Hyperboloid => HYPERBOLOID_RAY_CAP,
    }
}

/// Picks a point of the closure on the zone boundary when the zone has one.
fn closure_point<S: Scalar, R: Rng + ?Sized>(b: &BregmanFunction<S>, rng: &mut R) -> Point<S> {
    let p = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
    match b.zone {
        Zone::Whole => p,
        Zone::PositiveOrthant { .. } => {
            let mut c = p.into_coords();
            let i = rng.gen_range(0..c.len());
            c[i] = S::zero();
            Point::from_raw(c)
        }
    }
}

fn validate_bregman<S: Scalar, R: Rng + ?Sized>(
    b: &BregmanFunction<S>,
    budget: usize,
    rng: &mut R,
) -> ValidationReport {
    let budget = budget.max(1);
    let clauses = vec![
        clause_continuity(b, budget, rng),
        clause_strict_convexity(b, budget, rng),
        clause_gradient(b, budget, rng),
        clause_level_sets(b, budget, rng),
        clause_limit_at_closure(b, budget, rng),
        clause_sequential_consistency(b, budget, rng),
    ];
    ValidationReport {
        label: b.label.clone(),
        clauses,
    }
}

/// Approach sequence `y* + 2^-k (y0 - y*)` along the geodesic.
fn approach<S: Scalar>(m: &Manifold, target: &Point<S>, start: &Point<S>, k: i32) -> Result<Point<S>> {
    m.geodesic_point(target, start, S::lit(0.5f64.powi(k)))
}

fn clause_continuity<S: Scalar, R: Rng + ?Sized>(
    b: &BregmanFunction<S>,
    budget: usize,
    rng: &mut R,
) -> ClauseResult {
    let m = &b.manifold;
    let mut worst = 0.0f64;
    let mut detail = String::from("h continuous at sampled closure points");
    for _ in 0..budget {
        let target = closure_point(b, rng);
        let start = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let res = (|| -> Result<f64> {
            let h_star = b.value(&target)?;
            if !h_star.is_finite() {
                return Ok(f64::INFINITY);
            }
            let x = approach(m, &target, &start, 40)?;
            Ok((b.value(&x)? - h_star).abs().as_f64())
        })();
        match res {
            Ok(gap) => worst = worst.max(gap),
            Err(e) => {
                worst = f64::INFINITY;
                detail = format!("evaluation failed: {e}");
            }
        }
    }
    ClauseResult {
        clause: 'a',
        property: "continuity on the closure",
        passed: worst <= 1e-6,
        samples: budget,
        worst,
        detail,
    }
}

fn clause_strict_convexity<S: Scalar, R: Rng + ?Sized>(
    b: &BregmanFunction<S>,
    budget: usize,
    rng: &mut R,
) -> ClauseResult {
    let m = &b.manifold;
    let mut worst = f64::NEG_INFINITY;
    let mut counterexample = None;
    for _ in 0..budget {
        let x = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let y = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let Ok(d) = m.dist(&x, &y) else { continue };
        if d.as_f64() < 1e-3 {
            continue;
        }
        let Ok(mid) = m.geodesic_point(&x, &y, S::half()) else { continue };
        let (Ok(hx), Ok(hy), Ok(hm)) = (b.value(&x), b.value(&y), b.value(&mid)) else {
            continue;
        };
        // positive excess means the midpoint is not strictly below the chord
        let excess = (hm - S::half() * (hx + hy)).as_f64();
        if excess > worst {
            worst = excess;
        }
        if excess >= 0.0 && counterexample.is_none() {
            counterexample = Some((x.coords().iter().map(|c| c.as_f64()).collect::<Vec<_>>(),
                y.coords().iter().map(|c| c.as_f64()).collect::<Vec<_>>()));
        }
    }
    let passed = counterexample.is_none();
    ClauseResult {
        clause: 'b',
        property: "strict convexity (geodesic midpoints)",
        passed,
        samples: budget,
        worst,
        detail: match counterexample {
            Some((x, y)) => format!("midpoint above chord for x={x:?}, y={y:?}"),
            None => "midpoint strictly below chord on all samples".into(),
        },
    }
}

/// Largest relative disagreement between `grad f` and central differences over a tangent basis.
pub(crate) fn gradient_fd_error<S: Scalar>(
    m: &Manifold,
    x: &Point<S>,
    grad: &TangentVector<S>,
    f: impl Fn(&Point<S>) -> Result<S>,
) -> Result<f64> {
    let h = S::lit(FD_STEP);
    let scale = S::one().max(m.norm(grad));
    let mut worst = 0.0f64;
    for e in m.tangent_basis(x) {
        let fp = f(&m.exp(x, &e.scaled(h))?)?;
        let fm = f(&m.exp(x, &e.scaled(-h))?)?;
        let fd = (fp - fm) / (S::two() * h);
        let err = ((fd - m.pair(grad, &e)).abs() / scale).as_f64();
        worst = worst.max(err);
    }
    Ok(worst)
}

fn clause_gradient<S: Scalar, R: Rng + ?Sized>(
    b: &BregmanFunction<S>,
    budget: usize,
    rng: &mut R,
) -> ClauseResult {
    let m = &b.manifold;
    let mut worst = 0.0f64;
    for _ in 0..budget {
        let x = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let err = b
            .gradient(&x)
            .and_then(|g| gradient_fd_error(m, &x, &g, |p| b.value(p)))
            .unwrap_or(f64::INFINITY);
        worst = worst.max(err);
    }
    ClauseResult {
        clause: 'c',
        property: "gradient matches central differences",
        passed: worst <= 1e-5,
        samples: budget,
        worst,
        detail: format!("max relative error {worst:.3e} with step {FD_STEP:e}"),
    }
}

/// Walks a ray from `start` with doubling steps; returns `true` if the level
/// `D <= alpha` persists for the full ray length inside the zone closure.
fn ray_stays_below<S: Scalar>(
    b: &BregmanFunction<S>,
    start: &Point<S>,
    dir: &TangentVector<S>,
    divergence: impl Fn(&Point<S>) -> Result<S>,
) -> bool {
    let m = &b.manifold;
    let cap = ray_cap(m);
    let mut t = 0.01f64;
    loop {
        let Ok(p) = m.exp(start, &dir.scaled(S::lit(t))) else {
            return false;
        };
        if !b.zone.contains(&p) {
            // level set is cut off by the zone in this direction
            return false;
        }
        match divergence(&p) {
            Ok(d) if d.is_finite() && d.as_f64() <= LEVEL_ALPHA => {}
            _ => return false,
        }
        if t >= cap {
            return true;
        }
        t = (t * 2.0).min(cap);
    }
}

fn clause_level_sets<S: Scalar, R: Rng + ?Sized>(
    b: &BregmanFunction<S>,
    budget: usize,
    rng: &mut R,
) -> ClauseResult {
    let m = &b.manifold;
    let mut unbounded = None;
    for _ in 0..budget {
        let y = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let dir = m.random_direction(rng, &y, S::one());
        // Γ1(α, y) = {x : D(x, y) <= α}
        if ray_stays_below(b, &y, &dir, |x| b.divergence(x, &y)) {
            unbounded = Some("Γ1");
            break;
        }
        let x = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let dir = m.random_direction(rng, &x, S::one());
        // Γ2(x, α) = {y : D(x, y) <= α}
        if ray_stays_below(b, &x, &dir, |y| b.divergence(&x, y)) {
            unbounded = Some("Γ2");
            break;
        }
    }
    ClauseResult {
        clause: 'd',
        property: "bounded partial level sets",
        passed: unbounded.is_none(),
        samples: budget,
        worst: if unbounded.is_some() { 1.0 } else { 0.0 },
        detail: match unbounded {
            Some(which) => format!("{which} level set with α={LEVEL_ALPHA} unbounded along a sampled ray"),
            None => format!("every probed ray leaves the α={LEVEL_ALPHA} level sets"),
        },
    }
}

fn clause_limit_at_closure<S: Scalar, R: Rng + ?Sized>(
    b: &BregmanFunction<S>,
    budget: usize,
    rng: &mut R,
) -> ClauseResult {
    let m = &b.manifold;
    let mut worst = 0.0f64;
    let mut increasing = false;
    for _ in 0..budget {
        let target = closure_point(b, rng);
        let start = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let mut prev = f64::INFINITY;
        let mut last = f64::INFINITY;
        for k in 1..=40 {
            let d = approach(m, &target, &start, k)
                .and_then(|yk| b.divergence(&target, &yk))
                .map(|d| d.as_f64())
                .unwrap_or(f64::INFINITY);
            if d > prev * (1.0 + 1e-9) + 1e-12 {
                increasing = true;
            }
            prev = d;
            last = d;
        }
        worst = worst.max(last);
    }
    ClauseResult {
        clause: 'e',
        property: "D(y*, y^k) -> 0 when y^k -> y*",
        passed: worst <= 1e-8 && !increasing,
        samples: budget,
        worst,
        detail: if increasing {
            "divergence not monotone along an approach sequence".into()
        } else {
            format!("final divergence {worst:.3e} after 40 halvings")
        },
    }
}

fn clause_sequential_consistency<S: Scalar, R: Rng + ?Sized>(
    b: &BregmanFunction<S>,
    budget: usize,
    rng: &mut R,
) -> ClauseResult {
    let m = &b.manifold;
    let mut worst = 0.0f64;
    let mut failure = None;
    'outer: for _ in 0..budget {
        let target = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let start = b.sample_zone(rng, S::lit(SAMPLE_RADIUS));
        let mut final_dist = f64::INFINITY;
        for k in 1..=10 {
            let Ok(yk) = approach(m, &target, &start, 2 * k) else { continue };
            let delta = 10f64.powi(-k);
            let dir = m.random_direction(rng, &yk, S::one());
            // find z^k on the ray from y^k with D(z^k, y^k) = delta
            let d_at = |t: f64| -> Option<f64> {
                let z = m.exp(&yk, &dir.scaled(S::lit(t))).ok()?;
                if !b.zone.contains(&z) {
                    return None;
                }
                b.divergence(&z, &yk).ok().map(|d| d.as_f64())
            };
            let mut hi = 1e-6;
            loop {
                match d_at(hi) {
                    Some(d) if d >= delta => break,
                    Some(_) if hi < ray_cap(m) => hi *= 2.0,
                    Some(_) => {
                        failure = Some(format!("D(z, y^k) < {delta:e} along a ray of length {hi}"));
                        break 'outer;
                    }
                    // left the zone before reaching delta: try the next step
                    None => break,
                }
            }
            let mut lo = 0.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                match d_at(mid) {
                    Some(d) if d < delta => lo = mid,
                    _ => hi = mid,
                }
            }
            let Ok(z) = m.exp(&yk, &dir.scaled(S::lit(lo))) else { continue };
            if let Ok(d) = m.dist(&z, &target) {
                final_dist = d.as_f64();
            }
        }
        worst = worst.max(final_dist);
    }
    let passed = failure.is_none() && worst <= 1e-3;
    ClauseResult {
        clause: 'f',
        property: "D(z^k, y^k) -> 0 forces z^k -> y*",
        passed,
        samples: budget,
        worst,
        detail: failure.unwrap_or_else(|| format!("final distance to the limit {worst:.3e}")),
    }
}
