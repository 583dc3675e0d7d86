//! The outer proximal loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::bregman::BregmanFunction;
use crate::equilibrium::{ep_residual, Bifunction, ConstraintSet, EPResidual};
use crate::error::{Error, Result};
use crate::manifold::Point;
use crate::scalar::Scalar;
use crate::subsolver::{check_strategy, solve_inner, Armijo, InnerProblem, Strategy};

/// Lower-level `F`, upper-level `Q`, feasible set and Bregman function.
#[derive(Clone, Debug)]
pub struct BilevelProblem<S: Scalar> {
    pub f: Bifunction<S>,
    pub q: Bifunction<S>,
    pub omega: ConstraintSet<S>,
    pub bregman: BregmanFunction<S>,
}

impl<S: Scalar> BilevelProblem<S> {
    pub fn new(f: Bifunction<S>, q: Bifunction<S>, omega: ConstraintSet<S>, bregman: BregmanFunction<S>) -> Result<Self> {
        let m = *omega.manifold();
        for (name, mk) in [("F", f.manifold()), ("Q", q.manifold()), ("h", bregman.manifold())] {
            if *mk != m {
                return Err(Error::Configuration(format!("{name} lives on a different manifold than Ω")));
            }
        }
        if !omega.within_zone(bregman.zone()) {
            return Err(Error::Configuration(format!(
                "Ω is not contained in the zone of `{}`",
                bregman.label()
            )));
        }
        Ok(Self { f, q, omega, bregman })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    Full,
    /// Keeps every 10th iteration and the last one.
    Thin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    pub strategy: Strategy,
    pub tol: f64,
    pub max_iters: usize,
    pub armijo: Armijo,
    pub divergence_radius: Option<f64>,
    pub residual_probes: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::ProxMin,
            tol: 1e-9,
            max_iters: 5000,
            armijo: Armijo::default(),
            divergence_radius: None,
            residual_probes: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Fixed-point threshold on `d(x^{k+1}, x^k)`.
    pub tau_step: f64,
    /// EP membership tolerance on the gap of `F`.
    pub tau: f64,
    pub ep_probes: usize,
    pub inner: InnerConfig,
    pub trace_mode: TraceMode,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tau_step: 1e-8,
            tau: 1e-6,
            ep_probes: 64,
            inner: InnerConfig::default(),
            trace_mode: TraceMode::Full,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerSummary {
    pub iterations: usize,
    pub gap: f64,
    pub stationarity: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationTrace<S> {
    pub k: usize,
    pub x_k: Point<S>,
    pub x_next: Point<S>,
    pub step_dist: S,
    pub bregman_step: S,
    /// `D_h(ref, x^k)` for each reference point, in the order given.
    pub d_to_refs: Vec<S>,
    pub inner: InnerSummary,
    pub mu_k: S,
    pub lambda_k: S,
    /// `(λ_k/μ_k) <grad D_h(x^{k+1}, x^k), exp_{x^{k+1}}^{-1} y>` for the first reference.
    pub limsup_term: Option<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    StoppedFixedPoint,
    ConvergedStepTol,
    MaxIters,
    InnerFailure,
}

impl Status {
    pub fn is_success(self) -> bool {
        matches!(self, Status::StoppedFixedPoint | Status::ConvergedStepTol)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult<S> {
    pub x_final: Point<S>,
    pub status: Status,
    /// Outer iterations performed.
    pub iterations: usize,
    pub traces: Vec<IterationTrace<S>>,
    pub ep_f_residual: EPResidual<S>,
    /// `inf Q(x_final, y)` over `x_final` and trajectory points accepted as members of `EP(F)`.
    pub bilevel_residual: EPResidual<S>,
    pub inner_nonconverged: usize,
    pub max_dist_from_x0: S,
    pub failure: Option<String>,
}

fn iteration_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the outer loop `x^{k+1} ∈ EP(L_k, Ω)` with `L_k` regularized at `x^k`.
///
/// Stops when `d(x^{k+1}, x^k) <= tau_step` and the gap of `F` at `x^k` is at
/// least `-tau` (status `stopped_fixed_point`). With `Q ≡ 0` a small step alone
/// already certifies `x^k ∈ EP(F)` and gives `converged_step_tol`.
pub fn solve_bilevel<S: Scalar>(
    problem: &BilevelProblem<S>,
    sched: &Schedule,
    x0: &Point<S>,
    config: &SolverConfig,
    references: &[Point<S>],
) -> Result<SolveResult<S>> {
    sched.check_admissible(config.max_iters)?;
    check_strategy(&problem.f, &problem.q, config.inner.strategy)?;
    let omega = &problem.omega;
    let m = *omega.manifold();
    let b = &problem.bregman;
    if !omega.contains(x0) {
        return Err(Error::InvalidPoint("x0 is not in Ω".into()));
    }
    if !b.zone().contains(x0) {
        return Err(Error::Zone("x0 is not in the zone of the Bregman function".into()));
    }
    let tau = S::lit(config.tau);
    let tau_step = S::lit(config.tau_step);

    let mut x = x0.clone();
    let mut traces = Vec::new();
    let mut status = Status::MaxIters;
    let mut failure = None;
    let mut fixed_point_residual = None;
    let mut inner_nonconverged = 0;
    let mut max_dist = S::zero();
    let mut iterations = 0;

    for k in 0..config.max_iters {
        let mu = S::lit(sched.mu(k));
        let lambda = S::lit(sched.lambda(k));
        let l = Bifunction::regularized(&problem.f, &problem.q, mu, lambda, x.clone(), b)?;
        let mut inner = InnerProblem::new(l, omega.clone(), x.clone(), S::lit(config.inner.tol), config.inner.max_iters)?;
        inner.armijo = config.inner.armijo;
        inner.divergence_radius = config.inner.divergence_radius.map(S::lit);
        inner.residual_probes = config.inner.residual_probes;
        inner.seed = iteration_seed(config.seed, k);
        let sol = match solve_inner(&inner, config.inner.strategy) {
            Ok(sol) => sol,
            Err(e) => {
                status = Status::InnerFailure;
                failure = Some(format!("iteration {k}: {e}"));
                break;
            }
        };
        iterations = k + 1;
        if !sol.converged {
            inner_nonconverged += 1;
        }
        let x_next = sol.x.clone();
        let step_dist = m.dist(&x_next, &x)?;
        let bregman_step = b.divergence(&x_next, &x)?;
        let d_to_refs = references
            .iter()
            .map(|r| b.divergence(r, &x))
            .collect::<Result<Vec<_>>>()?;
        let limsup_term = match references.first() {
            Some(y) => Some(limsup_term(b, &x_next, &x, y, mu, lambda)?),
            None => None,
        };
        let keep = config.trace_mode == TraceMode::Full || k % 10 == 0;
        let trace = IterationTrace {
            k,
            x_k: x.clone(),
            x_next: x_next.clone(),
            step_dist,
            bregman_step,
            d_to_refs,
            inner: InnerSummary {
                iterations: sol.iterations,
                gap: sol.residual.gap.as_f64(),
                stationarity: sol.stationarity.as_f64(),
                converged: sol.converged,
            },
            mu_k: mu,
            lambda_k: lambda,
            limsup_term,
        };
        max_dist = max_dist.max(m.dist(&x_next, x0)?);

        if step_dist <= tau_step {
            if problem.q.is_zero() {
                traces.push(trace);
                status = Status::ConvergedStepTol;
                x = x_next;
                break;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(iteration_seed(!config.seed, k));
            let r = ep_residual(&problem.f, omega, &x, config.ep_probes, true, &mut rng)?;
            if r.accepts(tau) {
                traces.push(trace);
                status = Status::StoppedFixedPoint;
                fixed_point_residual = Some(r);
                break;
            }
        }
        let last = k + 1 == config.max_iters;
        if keep || last {
            traces.push(trace);
        }
        x = x_next;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let ep_f_residual = match fixed_point_residual {
        Some(r) => r,
        None => ep_residual(&problem.f, omega, &x, config.ep_probes, true, &mut rng)?,
    };
    let bilevel_residual = bilevel_residual(problem, &x, &traces, config, &mut rng)?;
    Ok(SolveResult {
        x_final: x,
        status,
        iterations,
        traces,
        ep_f_residual,
        bilevel_residual,
        inner_nonconverged,
        max_dist_from_x0: max_dist,
        failure,
    })
}

/// `(λ/μ) <grad D_h(x_next, x), exp_{x_next}^{-1} y>`.
pub(crate) fn limsup_term<S: Scalar>(
    b: &BregmanFunction<S>,
    x_next: &Point<S>,
    x: &Point<S>,
    y: &Point<S>,
    mu: S,
    lambda: S,
) -> Result<S> {
    let m = b.manifold();
    let g = b.grad_bregman_first(x_next, x)?;
    let l = m.log(x_next, y)?;
    Ok(lambda / mu * m.inner(x_next, &g, &l)?)
}

const BILEVEL_CANDIDATES: usize = 20;

fn bilevel_residual<S: Scalar>(
    problem: &BilevelProblem<S>,
    x: &Point<S>,
    traces: &[IterationTrace<S>],
    config: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EPResidual<S>> {
    let tau = S::lit(config.tau);
    let mut best = EPResidual {
        gap: S::zero(),
        worst_y: x.clone(),
        probes: 1,
    };
    if problem.q.is_zero() {
        return Ok(best);
    }
    let stride = (traces.len() / BILEVEL_CANDIDATES).max(1);
    for t in traces.iter().rev().step_by(stride).take(BILEVEL_CANDIDATES) {
        let y = &t.x_next;
        best.probes += 1;
        if !ep_residual(&problem.f, &problem.omega, y, config.ep_probes / 4, true, rng)?.accepts(tau) {
            continue;
        }
        let v = problem.q.eval(x, y)?;
        if v < best.gap {
            best.gap = v;
            best.worst_y = y.clone();
        }
    }
    Ok(best)
}
