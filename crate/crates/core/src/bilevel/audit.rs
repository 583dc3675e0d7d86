//! Post-run convergence diagnostics computed from iteration traces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::solver::{limsup_term, BilevelProblem, IterationTrace};
use crate::equilibrium::ep_residual;
use crate::error::{Error, Result};
use crate::manifold::Point;
use crate::scalar::Scalar;

/// Slack allowed in each quasi-Fejér inequality.
pub const FEJER_SLACK: f64 = 1e-8;

/// How the perturbation `ρ_k` of the quasi-Fejér inequality is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "values", rename_all = "snake_case")]
pub enum RhoRule {
    /// `(μ_k/λ_k) sup_j max(Q(x^{j+1}, ref), 0)` over the trajectory.
    SupBound,
    /// `(μ_k/λ_k) Q(x^{k+1}, ref)` evaluated per iteration.
    ProofFormula,
    Zero,
    /// Explicit values indexed by trace position.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditOptions {
    pub tail_tol: f64,
    pub tau: f64,
    pub probes: usize,
    pub seed: u64,
    pub step_tol: f64,
    pub bregman_step_tol: f64,
    pub limsup_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-3,
            tau: 1e-6,
            probes: 64,
            seed: 0,
            step_tol: 1e-6,
            bregman_step_tol: 1e-6,
            limsup_tol: 1e-3,
        }
    }
}

fn require_member<S: Scalar>(problem: &BilevelProblem<S>, y: &Point<S>, opts: &AuditOptions) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r = ep_residual(&problem.f, &problem.omega, y, opts.probes, true, &mut rng)?;
    if !r.accepts(S::lit(opts.tau)) {
        return Err(Error::AuditRefused(format!(
            "reference {:?} is not a member of EP(F, Ω): gap {} < -{}",
            y.coords(),
            r.gap,
            opts.tau
        )));
    }
    Ok(())
}

fn tail<T>(v: &[T]) -> &[T] {
    let start = v.len() - v.len().div_ceil(4);
    &v[start..]
}

#[derive(Clone, Debug, Serialize)]
pub struct FejerReport {
    pub reference: Vec<f64>,
    pub rule: RhoRule,
    /// `D_h(ref, x^k)` followed by `D_h(ref, x^{k+1})` of the last trace.
    pub divergences: Vec<f64>,
    pub rho: Vec<f64>,
    pub violations: usize,
    /// Largest `D(ref,x^{k+1}) - D(ref,x^k) - ρ_k` over all traces.
    pub worst_excess: f64,
    pub inequality_ok: bool,
    pub tail_oscillation: f64,
    pub tail_ok: bool,
    pub passed: bool,
}

/// Checks `D_h(ref, x^{k+1}) <= D_h(ref, x^k) + ρ_k + 1e-8` for every trace
/// and a settled tail of `{D_h(ref, x^k)}`.
pub fn fejer_audit<S: Scalar>(
    problem: &BilevelProblem<S>,
    traces: &[IterationTrace<S>],
    reference: &Point<S>,
    rule: &RhoRule,
    opts: &AuditOptions,
) -> Result<FejerReport> {
    require_member(problem, reference, opts)?;
    let b = &problem.bregman;
    let q_vals = traces
        .iter()
        .map(|t| problem.q.eval(&t.x_next, reference).map(|v| v.as_f64()))
        .collect::<Result<Vec<_>>>()?;
    let sup_q = q_vals.iter().fold(0.0f64, |a, &v| a.max(v));
    let rho: Vec<f64> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let ratio = (t.mu_k / t.lambda_k).as_f64();
            match rule {
                RhoRule::SupBound => ratio * sup_q,
                RhoRule::ProofFormula => ratio * q_vals[i],
                RhoRule::Zero => 0.0,
                RhoRule::Explicit(v) => v.get(i).copied().unwrap_or(0.0),
            }
        })
        .collect();
    let mut divergences = Vec::with_capacity(traces.len() + 1);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (i, t) in traces.iter().enumerate() {
        let before = b.divergence(reference, &t.x_k)?.as_f64();
        let after = b.divergence(reference, &t.x_next)?.as_f64();
        divergences.push(before);
        let excess = after - before - rho[i];
        worst = worst.max(excess);
        if excess > FEJER_SLACK {
            violations += 1;
        }
        if i + 1 == traces.len() {
            divergences.push(after);
        }
    }
    let tail_oscillation = if divergences.is_empty() {
        0.0
    } else {
        let t = tail(&divergences);
        let hi = t.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let lo = t.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        hi - lo
    };
    let inequality_ok = violations == 0;
    let tail_ok = tail_oscillation <= opts.tail_tol;
    Ok(FejerReport {
        reference: reference.coords().iter().map(|c| c.as_f64()).collect(),
        rule: rule.clone(),
        divergences,
        rho,
        violations,
        worst_excess: worst,
        inequality_ok,
        tail_oscillation,
        tail_ok,
        passed: inequality_ok && tail_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StepDecayReport {
    pub iterations: usize,
    pub insufficient_data: bool,
    pub final_step_dist: f64,
    pub final_bregman_step: f64,
    /// Maxima of `step_dist` over consecutive windows of `n/10` traces.
    pub window_maxima: Vec<f64>,
    pub monotone_windows: bool,
    pub passed: bool,
    pub diagnostic: String,
}

/// Checks that the final steps are small and that windowed maxima of the step
/// distances never increase.
pub fn step_decay_audit<S: Scalar>(traces: &[IterationTrace<S>], opts: &AuditOptions) -> StepDecayReport {
    let n = traces.len();
    let final_step = traces.last().map(|t| t.step_dist.as_f64()).unwrap_or(0.0);
    let final_breg = traces.last().map(|t| t.bregman_step.as_f64()).unwrap_or(0.0);
    if n < 10 {
        return StepDecayReport {
            iterations: n,
            insufficient_data: true,
            final_step_dist: final_step,
            final_bregman_step: final_breg,
            window_maxima: Vec::new(),
            monotone_windows: true,
            passed: true,
            diagnostic: format!("insufficient data: {n} iterations (need 10); vacuous pass"),
        };
    }
    let w = n / 10;
    let window_maxima: Vec<f64> = traces
        .chunks(w)
        .map(|c| c.iter().fold(0.0f64, |a, t| a.max(t.step_dist.as_f64())))
        .collect();
    let monotone_windows = window_maxima
        .windows(2)
        .all(|p| p[1] <= p[0] * (1.0 + 1e-9) + 1e-15);
    let small = final_step <= opts.step_tol && final_breg <= opts.bregman_step_tol;
    let mut diagnostic = Vec::new();
    if !small {
        diagnostic.push(format!(
            "final step d = {final_step:.3e} (tol {:e}), D = {final_breg:.3e} (tol {:e})",
            opts.step_tol, opts.bregman_step_tol
        ));
    }
    if !monotone_windows {
        diagnostic.push("windowed step maxima increase".to_string());
    }
    StepDecayReport {
        iterations: n,
        insufficient_data: false,
        final_step_dist: final_step,
        final_bregman_step: final_breg,
        window_maxima,
        monotone_windows,
        passed: small && monotone_windows,
        diagnostic: if diagnostic.is_empty() { "steps decay".into() } else { diagnostic.join("; ") },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimsupEntry {
    pub reference: Vec<f64>,
    pub terms: Vec<f64>,
    pub tail_max: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimsupReport {
    pub entries: Vec<LimsupEntry>,
    pub tolerance: f64,
    pub passed: bool,
    pub note: &'static str,
}

/// Evaluates `t_k = (λ_k/μ_k) <grad D_h(x^{k+1}, x^k), exp_{x^{k+1}}^{-1} y>` and
/// passes iff the maximum over the last quarter is at most `limsup_tol` for each `y`.
pub fn limsup_condition_audit<S: Scalar>(
    problem: &BilevelProblem<S>,
    traces: &[IterationTrace<S>],
    y_refs: &[Point<S>],
    opts: &AuditOptions,
) -> Result<LimsupReport> {
    let mut entries = Vec::with_capacity(y_refs.len());
    for y in y_refs {
        require_member(problem, y, opts)?;
        let terms = traces
            .iter()
            .map(|t| limsup_term(&problem.bregman, &t.x_next, &t.x_k, y, t.mu_k, t.lambda_k).map(|v| v.as_f64()))
            .collect::<Result<Vec<_>>>()?;
        let tail_max = if terms.is_empty() {
            f64::NEG_INFINITY
        } else {
            tail(&terms).iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v))
        };
        entries.push(LimsupEntry {
            reference: y.coords().iter().map(|c| c.as_f64()).collect(),
            passed: tail_max <= opts.limsup_tol,
            terms,
            tail_max,
        });
    }
    Ok(LimsupReport {
        passed: entries.iter().all(|e| e.passed),
        entries,
        tolerance: opts.limsup_tol,
        note: "advisory: a finite tail cannot certify a limsup",
    })
}
