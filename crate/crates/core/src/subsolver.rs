//! Inner solver for `find x ∈ Ω with L(x, y) >= 0 for all y ∈ Ω`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{ep_residual, Bifunction, ConstraintSet, EPResidual};
use crate::error::{Error, Result};
use crate::manifold::{Point, TangentVector};
use crate::scalar::Scalar;

/// Backtracking parameters for [`geodesic_descent`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Armijo {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub min_step: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            min_step: 1e-20,
        }
    }
}

/// A differentiable objective on the manifold.
pub trait Objective<S: Scalar> {
    fn value(&self, x: &Point<S>) -> Result<S>;
    fn gradient(&self, x: &Point<S>) -> Result<TangentVector<S>>;
}

/// [`Objective`] from a pair of closures.
pub struct FnObjective<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FnObjective<V, G> {
    pub fn new(value: V, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<S, V, G> Objective<S> for FnObjective<V, G>
where
    S: Scalar,
    V: Fn(&Point<S>) -> Result<S>,
    G: Fn(&Point<S>) -> Result<TangentVector<S>>,
{
    fn value(&self, x: &Point<S>) -> Result<S> {
        (self.value)(x)
    }

    fn gradient(&self, x: &Point<S>) -> Result<TangentVector<S>> {
        (self.gradient)(x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DescentOutcome<S> {
    pub x: Point<S>,
    pub value: S,
    pub iterations: usize,
    pub stationarity: S,
    pub converged: bool,
}

/// Projected-gradient stationarity `d(x, P_Ω(exp_x(-g)))`.
pub fn stationarity<S: Scalar>(omega: &ConstraintSet<S>, x: &Point<S>, g: &TangentVector<S>) -> Result<S> {
    let m = omega.manifold();
    let p = omega.project(&m.exp(x, &g.scaled(-S::one()))?)?;
    m.dist(x, &p)
}

/// Projected geodesic gradient descent with Armijo backtracking.
///
/// A trial point is `P_Ω(exp_x(-t g))`; it is accepted when
/// `f(x_t) <= f(x) + c <g, exp_x^{-1} x_t>`. When the change in value is lost
/// in roundoff, a trial is accepted iff it lowers the stationarity measure.
pub fn geodesic_descent<S: Scalar, O: Objective<S> + ?Sized>(
    f: &O,
    omega: &ConstraintSet<S>,
    x0: &Point<S>,
    tol: S,
    max_iters: usize,
    armijo: &Armijo,
) -> Result<DescentOutcome<S>> {
    let m = *omega.manifold();
    let c = S::lit(armijo.sufficient_decrease);
    let noise = S::lit(64.0) * S::epsilon();
    let mut x = omega.project(x0)?;
    let mut fx = f.value(&x)?;
    let mut g = f.gradient(&x)?;
    let mut stat = stationarity(omega, &x, &g)?;
    let mut iterations = 0;
    while stat > tol && iterations < max_iters {
        let mut t = S::lit(armijo.initial_step);
        let mut accepted = None;
        while t.as_f64() >= armijo.min_step {
            let xt = omega.project(&m.exp(&x, &g.scaled(-t))?)?;
            let ft = f.value(&xt)?;
            if (ft - fx).abs() <= noise * (S::one() + fx.abs()) {
                // value comparison is meaningless at this scale
                let gt = f.gradient(&xt)?;
                if stationarity(omega, &xt, &gt)? < stat {
                    accepted = Some((xt, ft));
                    break;
                }
            } else {
                let slope = m.pair(&g, &m.log(&x, &xt)?);
                if ft <= fx + c * slope {
                    accepted = Some((xt, ft));
                    break;
                }
            }
            t = t * S::lit(armijo.shrink);
        }
        let Some((xt, ft)) = accepted else { break };
        x = xt;
        fx = ft;
        g = f.gradient(&x)?;
        stat = stationarity(omega, &x, &g)?;
        iterations += 1;
    }
    if !fx.is_finite() || !stat.is_finite() {
        return Err(Error::NonFinite("objective during geodesic descent".into()));
    }
    Ok(DescentOutcome {
        x,
        value: fx,
        iterations,
        stationarity: stat,
        converged: stat <= tol,
    })
}

/// Inner solution strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ProxMin,
    BestResponse,
    Extragradient,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::ProxMin, Strategy::BestResponse, Strategy::Extragradient];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ProxMin => "prox_min",
            Strategy::BestResponse => "best_response",
            Strategy::Extragradient => "extragradient",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::Configuration(format!(
                    "unknown inner strategy `{s}` (expected prox_min, best_response or extragradient)"
                ))
            })
    }
}

/// One inner problem `x ∈ EP(L, Ω)`.
#[derive(Clone, Debug)]
pub struct InnerProblem<S: Scalar> {
    pub l: Bifunction<S>,
    pub omega: ConstraintSet<S>,
    pub x_init: Point<S>,
    pub tol_inner: S,
    pub max_inner_iters: usize,
    pub armijo: Armijo,
    /// Defaults to `1e3 (1 + d(x_init, z))` with `z` the regularization center.
    pub divergence_radius: Option<S>,
    /// Random probes used by the closing residual audit.
    pub residual_probes: usize,
    pub seed: u64,
}

impl<S: Scalar> InnerProblem<S> {
    pub fn new(
        l: Bifunction<S>,
        omega: ConstraintSet<S>,
        x_init: Point<S>,
        tol_inner: S,
        max_inner_iters: usize,
    ) -> Result<Self> {
        if !(tol_inner > S::zero()) {
            return Err(Error::Parameter("inner tolerance must be positive".into()));
        }
        if !omega.contains(&x_init) {
            return Err(Error::InvalidPoint("inner starting point is outside Ω".into()));
        }
        Ok(Self {
            l,
            omega,
            x_init,
            tol_inner,
            max_inner_iters,
            armijo: Armijo::default(),
            divergence_radius: None,
            residual_probes: 32,
            seed: 0,
        })
    }

    fn radius(&self) -> Result<S> {
        if let Some(r) = self.divergence_radius {
            return Ok(r);
        }
        let z = self
            .l
            .regularization()
            .map(|r| r.anchor.clone())
            .unwrap_or_else(|| self.x_init.clone());
        let d = self.omega.manifold().dist(&self.x_init, &z)?;
        Ok(S::lit(1e3) * (S::one() + d))
    }

    fn check_divergence(&self, x: &Point<S>, radius: S) -> Result<()> {
        let d = self.omega.manifold().dist(x, &self.x_init)?;
        if !(d <= radius) {
            return Err(Error::Divergence {
                distance: d.as_f64(),
                radius: radius.as_f64(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerSolution<S> {
    pub x: Point<S>,
    pub residual: EPResidual<S>,
    pub iterations: usize,
    pub strategy: Strategy,
    pub converged: bool,
    /// Strategy-specific stationarity measure at `x`.
    pub stationarity: S,
}

/// Solves the inner problem with the given strategy.
pub fn solve_inner<S: Scalar>(p: &InnerProblem<S>, strategy: Strategy) -> Result<InnerSolution<S>> {
    let radius = p.radius()?;
    // iterate well below tol_inner so the probe-based gap clears -tol_inner
    let stat_tol = p.tol_inner * S::lit(1e-2);
    let (x, iterations, stat) = match strategy {
        Strategy::ProxMin => prox_min(p, stat_tol)?,
        Strategy::BestResponse => best_response(p, stat_tol, radius)?,
        Strategy::Extragradient => extragradient(p, stat_tol, radius)?,
    };
    p.check_divergence(&x, radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let residual = ep_residual(&p.l, &p.omega, &x, p.residual_probes, true, &mut rng)?;
    let converged = stat <= stat_tol && residual.accepts(p.tol_inner);
    Ok(InnerSolution {
        x,
        residual,
        iterations,
        strategy,
        converged,
        stationarity: stat,
    })
}

/// Rejects a strategy that cannot handle the given `F` and `Q`.
pub fn check_strategy<S: Scalar>(f: &Bifunction<S>, q: &Bifunction<S>, strategy: Strategy) -> Result<()> {
    for part in [f, q] {
        let ok = match strategy {
            Strategy::ProxMin => part.is_zero() || part.objective().is_some(),
            Strategy::BestResponse | Strategy::Extragradient => part.has_gradient(),
        };
        if !ok {
            return Err(Error::Configuration(format!(
                "strategy {strategy} cannot handle bifunction `{}`{}",
                part.label(),
                if strategy == Strategy::ProxMin { " (needs minimization type)" } else { " (needs a gradient oracle)" }
            )));
        }
    }
    Ok(())
}

fn prox_min<S: Scalar>(p: &InnerProblem<S>, tol: S) -> Result<(Point<S>, usize, S)> {
    let r = p.l.regularization().ok_or_else(|| {
        Error::Configuration("prox_min needs a regularized bifunction".into())
    })?;
    check_strategy(&r.f, &r.q, Strategy::ProxMin)?;
    let value = |y: &Point<S>| -> Result<S> {
        let mut v = r.lambda * r.bregman.raw_distance(y, &r.anchor)?;
        if let Some(phi) = r.f.objective() {
            v = v + phi.value(y);
        }
        if let Some(phi) = r.q.objective() {
            v = v + r.mu * phi.value(y);
        }
        Ok(v)
    };
    let gradient = |y: &Point<S>| -> Result<TangentVector<S>> {
        let mut g = r.bregman.grad_bregman_first(y, &r.anchor)?.scaled(r.lambda);
        if let Some(phi) = r.f.objective() {
            g = g.add(&phi.gradient(y))?;
        }
        if let Some(phi) = r.q.objective() {
            g = g.add_scaled(r.mu, &phi.gradient(y))?;
        }
        Ok(g)
    };
    let out = geodesic_descent(
        &FnObjective::new(value, gradient),
        &p.omega,
        &p.x_init,
        tol,
        p.max_inner_iters,
        &p.armijo,
    )?;
    Ok((out.x, out.iterations, out.stationarity))
}

fn best_response<S: Scalar>(p: &InnerProblem<S>, tol: S, radius: S) -> Result<(Point<S>, usize, S)> {
    if !p.l.has_gradient() {
        return Err(Error::Configuration("best_response needs a gradient oracle for L".into()));
    }
    let m = *p.omega.manifold();
    let mut x = p.x_init.clone();
    let mut step = S::infinity();
    let mut iterations = 0;
    while iterations < p.max_inner_iters {
        let xc = x.clone();
        let obj = FnObjective::new(|y: &Point<S>| p.l.eval(&xc, y), |y: &Point<S>| p.l.grad_second(&xc, y));
        let out = geodesic_descent(&obj, &p.omega, &x, tol * S::lit(1e-2), p.max_inner_iters, &p.armijo)?;
        step = m.dist(&out.x, &x)?;
        x = out.x;
        iterations += 1;
        p.check_divergence(&x, radius)?;
        if step <= tol {
            break;
        }
    }
    Ok((x, iterations, step))
}

fn extragradient<S: Scalar>(p: &InnerProblem<S>, tol: S, radius: S) -> Result<(Point<S>, usize, S)> {
    if !p.l.has_gradient() {
        return Err(Error::Configuration("extragradient needs the operator of L".into()));
    }
    let m = *p.omega.manifold();
    let lambda = p.l.regularization().map(|r| r.lambda).unwrap_or(S::one());
    let s_min = S::lit(1e-14);
    let mut s = S::half() / lambda;
    let mut x = p.x_init.clone();
    let mut tx = p.l.operator(&x)?;
    let mut merit = stationarity(&p.omega, &x, &tx)?;
    let mut iterations = 0;
    while merit > tol && iterations < p.max_inner_iters && s > s_min {
        iterations += 1;
        let y = p.omega.project(&m.exp(&x, &tx.scaled(-s))?)?;
        let ty = m.parallel_transport(&y, &x, &p.l.operator(&y)?)?;
        let xn = p.omega.project(&m.exp(&x, &ty.scaled(-s))?)?;
        let txn = p.l.operator(&xn)?;
        let mn = stationarity(&p.omega, &xn, &txn)?;
        if !(mn < merit) {
            s = s * S::half();
            continue;
        }
        x = xn;
        tx = txn;
        merit = mn;
        p.check_divergence(&x, radius)?;
    }
    Ok((x, iterations, merit))
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport<S> {
    pub trials: usize,
    pub passed: bool,
    pub max_pairwise_distance: f64,
    pub tolerance: f64,
    pub solutions: Vec<Point<S>>,
}

/// Runs `solve_inner` from `trials` random starts in `Ω`; passes iff all returned
/// points are pairwise within `10 tol_inner`. The first start is `x_init`.
pub fn verify_uniqueness<S: Scalar>(
    p: &InnerProblem<S>,
    strategy: Strategy,
    trials: usize,
    seed: u64,
) -> Result<UniquenessReport<S>> {
    let trials = trials.max(1);
    let starts: Vec<Point<S>> = (0..trials)
        .map(|i| {
            if i == 0 {
                p.x_init.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                p.omega.sample(&mut rng)
            }
        })
        .collect();
    let solutions: Vec<Point<S>> = starts
        .into_par_iter()
        .map(|start| {
            let mut q = p.clone();
            q.x_init = start;
            // keep the radius anchored at the original start
            if q.divergence_radius.is_none() {
                q.divergence_radius = Some(p.radius()?);
            }
            solve_inner(&q, strategy).map(|s| s.x)
        })
        .collect::<Result<_>>()?;
    let m = p.omega.manifold();
    let mut worst = 0.0f64;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            worst = worst.max(m.dist(&solutions[i], &solutions[j])?.as_f64());
        }
    }
    let tolerance = 10.0 * p.tol_inner.as_f64();
    Ok(UniquenessReport {
        trials,
        passed: worst <= tolerance,
        max_pairwise_distance: worst,
        tolerance,
        solutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::BregmanFunction;
    use crate::equilibrium::{ScalarField, VectorField};
    use crate::manifold::Manifold;

    fn quad_problem(strategy_tol: f64) -> InnerProblem<f64> {
        let m = Manifold::euclidean(2);
        let f = Bifunction::minimization(ScalarField::quadratic(m, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let b = BregmanFunction::<f64>::squared_norm(m).unwrap();
        let z = m.point(vec![2.0, 0.0]).unwrap();
        // μ must be positive; Q ≡ 0 makes it irrelevant
        let l = Bifunction::regularized(&f, &Bifunction::zero(m), 1.0, 1.0, z.clone(), &b).unwrap();
        let omega = ConstraintSet::whole(m, 5.0).unwrap();
        InnerProblem::new(l, omega, z, strategy_tol, 2000).unwrap()
    }

    #[test]
    fn prox_min_closed_form() {
        let p = quad_problem(1e-9);
        let sol = solve_inner(&p, Strategy::ProxMin).unwrap();
        assert!(sol.converged, "{sol:?}");
        assert!((sol.x.coords()[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!(sol.x.coords()[1].abs() < 1e-9);
        assert!(sol.residual.gap >= -1e-9);
    }

    #[test]
    fn strategies_agree_on_quadratic() {
        let p = quad_problem(1e-7);
        let xs: Vec<_> = Strategy::ALL
            .iter()
            .map(|&s| {
                let sol = solve_inner(&p, s).unwrap();
                assert!(sol.converged, "{s} {:?}", sol.stationarity);
                sol.x
            })
            .collect();
        let m = p.omega.manifold();
        for a in &xs {
            for b in &xs {
                assert!(m.dist(a, b).unwrap() <= 1e-5);
            }
        }
    }

    #[test]
    fn zero_bifunction_returns_start() {
        let m = Manifold::hyperboloid(2);
        let b = BregmanFunction::energy(m, m.origin());
        let z = m.lift(&[0.4, -0.1]).unwrap();
        let zero = Bifunction::zero(m);
        let l = Bifunction::regularized(&zero, &zero, 1.0, 1.0, z.clone(), &b).unwrap();
        let omega = ConstraintSet::whole(m, 2.0).unwrap();
        let p = InnerProblem::new(l, omega, z.clone(), 1e-8, 100).unwrap();
        for s in Strategy::ALL {
            let sol = solve_inner(&p, s).unwrap();
            assert!(m.dist(&sol.x, &z).unwrap() <= 1e-12, "{s}");
            assert!(sol.converged);
        }
    }

    #[test]
    fn prox_min_rejects_vi_problem() {
        let m = Manifold::euclidean(2);
        let f = Bifunction::variational(VectorField::scaled_identity(m).unwrap());
        let b = BregmanFunction::<f64>::squared_norm(m).unwrap();
        let l = Bifunction::regularized(&f, &f, 1.0, 1.0, m.origin(), &b).unwrap();
        let p = InnerProblem::new(l, ConstraintSet::whole(m, 1.0).unwrap(), m.origin(), 1e-6, 10).unwrap();
        assert!(matches!(solve_inner(&p, Strategy::ProxMin), Err(Error::Configuration(_))));
    }

    #[test]
    fn best_response_divergence_is_reported() {
        // argmin_y of L(x, ·) is unbounded for a linear L on the whole plane
        let m = Manifold::euclidean(2);
        let f = Bifunction::variational(VectorField::linear(m, vec![vec![0.0; 2]; 2], vec![1.0, 0.0]).unwrap());
        let b = BregmanFunction::<f64>::squared_norm(m).unwrap();
        let l = Bifunction::regularized(&f, &Bifunction::zero(m), 1.0, 1.0, m.origin(), &b).unwrap();
        let mut p = InnerProblem::new(l, ConstraintSet::whole(m, 1.0).unwrap(), m.origin(), 1e-6, 50).unwrap();
        p.divergence_radius = Some(10.0);
        assert!(matches!(solve_inner(&p, Strategy::BestResponse), Err(Error::Divergence { .. })));
    }

    #[test]
    fn descent_examples() {
        let e = Manifold::euclidean(2);
        let a = e.point(vec![1.5, -0.5]).unwrap();
        let phi = ScalarField::squared_distance(e, a.clone());
        let obj = FnObjective::new(|x: &Point<f64>| Ok(phi.value(x)), |x: &Point<f64>| Ok(phi.gradient(x)));
        let whole = ConstraintSet::whole(e, 1.0).unwrap();
        let out = geodesic_descent(&obj, &whole, &e.origin(), 1e-10, 100, &Armijo::default()).unwrap();
        assert!(out.converged && e.dist(&out.x, &a).unwrap() <= 1e-10);

        let h = Manifold::hyperboloid(2);
        let a = h.lift(&[0.7, 0.2]).unwrap();
        let phi = ScalarField::squared_distance(h, a.clone());
        let obj = FnObjective::new(|x: &Point<f64>| Ok(phi.value(x)), |x: &Point<f64>| Ok(phi.gradient(x)));
        let ball = ConstraintSet::ball(h, h.origin(), 2.0).unwrap();
        let out = geodesic_descent(&obj, &ball, &h.lift(&[-1.0, 0.5]).unwrap(), 1e-10, 100, &Armijo::default()).unwrap();
        assert!(out.converged && h.dist(&out.x, &a).unwrap() <= 1e-10);

        let lin = ScalarField::linear(e, vec![1.0, -2.0]).unwrap();
        let obj = FnObjective::new(|x: &Point<f64>| Ok(lin.value(x)), |x: &Point<f64>| Ok(lin.gradient(x)));
        let bx = ConstraintSet::bounding_box(e, vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let out = geodesic_descent(&obj, &bx, &e.origin(), 1e-10, 100, &Armijo::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.x.coords(), &[-1.0, 1.0]);
    }

    #[test]
    fn descent_values_never_increase() {
        let e = Manifold::euclidean(2);
        let phi = ScalarField::quadratic(e, vec![1.0, -2.0], vec![10.0, 0.1]).unwrap();
        let omega = ConstraintSet::whole(e, 1.0).unwrap();
        let mut x = e.point(vec![4.0, 4.0]).unwrap();
        let mut last = phi.value(&x);
        let obj = FnObjective::new(|x: &Point<f64>| Ok(phi.value(x)), |x: &Point<f64>| Ok(phi.gradient(x)));
        for _ in 0..200 {
            x = geodesic_descent(&obj, &omega, &x, 0.0, 1, &Armijo::default()).unwrap().x;
            let v = phi.value(&x);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn uniqueness_from_random_starts() {
        let p = quad_problem(1e-6);
        let rep = verify_uniqueness(&p, Strategy::ProxMin, 5, 11).unwrap();
        assert!(rep.passed, "{}", rep.max_pairwise_distance);
        assert!(verify_uniqueness(&p, Strategy::ProxMin, 1, 0).unwrap().passed);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("newton".parse::<Strategy>().is_err());
    }
}
