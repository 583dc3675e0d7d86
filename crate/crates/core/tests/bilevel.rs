use geoprox::bilevel::{
    fejer_audit, limsup_condition_audit, solve_bilevel, step_decay_audit, validate_schedule, AuditOptions,
    BilevelProblem, RhoRule, Schedule, Sequence, SolverConfig, Status, TraceMode,
};
use geoprox::bregman::BregmanFunction;
use geoprox::equilibrium::{Bifunction, ConstraintSet, ScalarField};
use geoprox::subsolver::Strategy;
use geoprox::{Error, Manifold};

fn plane() -> Manifold {
    Manifold::euclidean(2)
}

fn bilevel_quadratic() -> BilevelProblem<f64> {
    let m = plane();
    let f = Bifunction::minimization(ScalarField::quadratic(m, vec![0.0, 0.0], vec![1.0, 0.0]).unwrap());
    let q = Bifunction::minimization(ScalarField::quadratic(m, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap());
    let omega = ConstraintSet::bounding_box(m, vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
    BilevelProblem::new(f, q, omega, BregmanFunction::squared_norm(m).unwrap()).unwrap()
}

fn config(max_iters: usize) -> SolverConfig {
    let mut c = SolverConfig::default();
    c.max_iters = max_iters;
    c.inner.tol = 1e-11;
    c
}

/// Exact iterates of the bilevel quadratic with λ = 1: each coordinate solves a
/// scalar quadratic in closed form.
fn quadratic_oracle(x0: [f64; 2], mu: impl Fn(usize) -> f64, n: usize) -> Vec<[f64; 2]> {
    let mut xs = vec![x0];
    for k in 0..n {
        let [x1, x2] = xs[k];
        let m = mu(k);
        xs.push([(2.0 * m + x1) / (3.0 + 2.0 * m), (2.0 * m + x2) / (1.0 + 2.0 * m)]);
    }
    xs
}

#[test]
fn zero_problem_stops_at_start() {
    let m = Manifold::hyperboloid(2);
    let zero = Bifunction::zero(m);
    let omega = ConstraintSet::whole(m, 2.0).unwrap();
    let p = BilevelProblem::new(zero.clone(), zero, omega, BregmanFunction::energy(m, m.origin())).unwrap();
    let x0 = m.lift(&[0.3, 0.4]).unwrap();
    let res = solve_bilevel(&p, &Schedule::standard(1.0, 2.0, 1.0, 0.0), &x0, &config(50), &[]).unwrap();
    assert_eq!(res.status, Status::ConvergedStepTol);
    assert_eq!(res.iterations, 1);
    assert!(m.dist(&res.x_final, &x0).unwrap() <= 1e-12);
}

#[test]
fn bilevel_quadratic_follows_closed_form_iterates() {
    let p = bilevel_quadratic();
    let sched = Schedule::standard(1.0, 2.0, 1.0, 0.0);
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let y = plane().point(vec![0.0, 1.0]).unwrap();
    let res = solve_bilevel(&p, &sched, &x0, &config(500), &[y]).unwrap();
    let oracle = quadratic_oracle([3.0, -2.0], |k| sched.mu(k), 500);
    assert_eq!(res.traces.len(), 500);
    for t in &res.traces {
        let o = oracle[t.k + 1];
        assert!((t.x_next.coords()[0] - o[0]).abs() <= 1e-8, "k={}", t.k);
        assert!((t.x_next.coords()[1] - o[1]).abs() <= 1e-8, "k={}", t.k);
    }
    // the summable μ_k freezes x2 at 1 - 3 π√2 / sinh(π√2), away from the bilevel solution
    let s = std::f64::consts::PI * 2f64.sqrt();
    let limit = 1.0 - 3.0 * s / s.sinh();
    assert!((res.x_final.coords()[1] - limit).abs() < 3e-3);
    assert_eq!(res.status, Status::MaxIters);
}

#[test]
fn bilevel_quadratic_fejer_with_proof_rho() {
    let p = bilevel_quadratic();
    let sched = Schedule::standard(1.0, 2.0, 1.0, 0.0);
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let y = plane().point(vec![0.0, 1.0]).unwrap();
    let res = solve_bilevel(&p, &sched, &x0, &config(500), &[y.clone()]).unwrap();
    let opts = AuditOptions::default();
    let rep = fejer_audit(&p, &res.traces, &y, &RhoRule::ProofFormula, &opts).unwrap();
    assert!(rep.inequality_ok, "{}", rep.worst_excess);
    let sup = fejer_audit(&p, &res.traces, &y, &RhoRule::SupBound, &opts).unwrap();
    assert!(sup.inequality_ok);
    // d_to_refs agree with the audit's own divergences
    for (t, d) in res.traces.iter().zip(&rep.divergences) {
        assert!((t.d_to_refs[0] - d).abs() < 1e-15);
    }
}

#[test]
fn bilevel_quadratic_limsup_tail_does_not_vanish() {
    // t_k -> 2 (1 - x2_inf)^2 > 0 because x2 stalls short of 1
    let p = bilevel_quadratic();
    let sched = Schedule::standard(1.0, 2.0, 1.0, 0.0);
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let y = plane().point(vec![0.0, 1.0]).unwrap();
    let res = solve_bilevel(&p, &sched, &x0, &config(500), &[y.clone()]).unwrap();
    let rep = limsup_condition_audit(&p, &res.traces, &[y], &AuditOptions::default()).unwrap();
    assert!(!rep.passed);
    let s = std::f64::consts::PI * 2f64.sqrt();
    let gap = 3.0 * s / s.sinh();
    assert!((rep.entries[0].tail_max - 2.0 * gap * gap).abs() < 5e-3);
    for (t, v) in res.traces.iter().zip(&rep.entries[0].terms) {
        assert_eq!(t.limsup_term, Some(*v));
    }
}

fn classical_prox(lambda: f64) -> (BilevelProblem<f64>, Schedule) {
    let m = plane();
    let a = vec![1.5, -0.5];
    let f = Bifunction::minimization(ScalarField::quadratic(m, a, vec![1.0, 1.0]).unwrap());
    let omega = ConstraintSet::whole(m, 10.0).unwrap();
    let p = BilevelProblem::new(f, Bifunction::zero(m), omega, BregmanFunction::squared_norm(m).unwrap()).unwrap();
    (p, Schedule::standard(1.0, 2.0, lambda, 0.0))
}

#[test]
fn classical_prox_recursion_is_recovered() {
    let (p, sched) = classical_prox(5.0);
    let mut cfg = config(100);
    // the recursion reaches an exact floating-point fixed point before k = 100
    cfg.tau_step = -1.0;
    let x0 = plane().point(vec![-4.0, 3.0]).unwrap();
    let res = solve_bilevel(&p, &sched, &x0, &cfg, &[]).unwrap();
    assert_eq!(res.traces.len(), 100);
    let (a, lambda) = ([1.5, -0.5], 5.0);
    let mut x = [-4.0, 3.0];
    for t in &res.traces {
        for i in 0..2 {
            x[i] = (2.0 * a[i] + lambda * x[i]) / (2.0 + lambda);
            assert!((t.x_next.coords()[i] - x[i]).abs() <= 1e-8);
        }
    }
}

#[test]
fn classical_prox_is_fejer_and_limsup_vanishes() {
    let (p, sched) = classical_prox(1.0);
    let x0 = plane().point(vec![-4.0, 3.0]).unwrap();
    let res = solve_bilevel(&p, &sched, &x0, &config(200), &[]).unwrap();
    assert_eq!(res.status, Status::ConvergedStepTol);
    let a = plane().point(vec![1.5, -0.5]).unwrap();
    let opts = AuditOptions::default();
    let rep = fejer_audit(&p, &res.traces, &a, &RhoRule::Zero, &opts).unwrap();
    assert!(rep.passed);
    // strict decrease while the steps are above roundoff
    for w in rep.divergences.windows(2).take(10) {
        assert!(w[1] < w[0]);
    }
    let decay = step_decay_audit(&res.traces, &opts);
    assert!(decay.passed, "{}", decay.diagnostic);
    assert!(decay.final_step_dist <= 1e-6);
    let lim = limsup_condition_audit(&p, &res.traces, &[a.clone(), res.x_final.clone()], &opts).unwrap();
    assert!(lim.passed, "{:?}", lim.entries.iter().map(|e| e.tail_max).collect::<Vec<_>>());
}

#[test]
fn constant_sequence_audits_are_trivial() {
    let (p, sched) = classical_prox(1.0);
    let a = plane().point(vec![1.5, -0.5]).unwrap();
    let res = solve_bilevel(&p, &sched, &a, &config(10), &[]).unwrap();
    assert_eq!(res.status, Status::ConvergedStepTol);
    let rep = fejer_audit(&p, &res.traces, &a, &RhoRule::Zero, &AuditOptions::default()).unwrap();
    assert!(rep.passed);
    assert!(rep.divergences.iter().all(|d| *d == 0.0));
    let decay = step_decay_audit(&res.traces, &AuditOptions::default());
    assert!(decay.insufficient_data && decay.passed);
    assert!(decay.diagnostic.contains("insufficient data"));
}

#[test]
fn audits_refuse_non_members() {
    let p = bilevel_quadratic();
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let res = solve_bilevel(&p, &Schedule::standard(1.0, 2.0, 1.0, 0.0), &x0, &config(5), &[]).unwrap();
    let bad = plane().point(vec![1.0, 1.0]).unwrap();
    let err = fejer_audit(&p, &res.traces, &bad, &RhoRule::SupBound, &AuditOptions::default()).unwrap_err();
    assert!(matches!(err, Error::AuditRefused(_)));
    assert!(limsup_condition_audit(&p, &res.traces, &[bad], &AuditOptions::default()).is_err());
}

#[test]
fn fast_decaying_mu_breaks_the_limsup_condition() {
    let p = bilevel_quadratic();
    let sched = Schedule {
        mu: Sequence::Geometric { c0: 1.0, rate: (-1.0f64).exp() },
        lambda: Sequence::Constant { value: 1.0 },
        theta: 0.0,
    };
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let y = plane().point(vec![0.0, 1.0]).unwrap();
    // long enough for a tail, short enough that steps stay above roundoff
    let mut cfg = config(20);
    cfg.tau_step = -1.0;
    let res = solve_bilevel(&p, &sched, &x0, &cfg, &[]).unwrap();
    let rep = limsup_condition_audit(&p, &res.traces, &[y], &AuditOptions::default()).unwrap();
    assert!(!rep.passed);
}

#[test]
fn non_decaying_schedule_fails_step_decay() {
    let p = bilevel_quadratic();
    let sched = Schedule {
        mu: Sequence::Cyclic { values: vec![1.0, 10.0] },
        lambda: Sequence::Constant { value: 1.0 },
        theta: 0.0,
    };
    assert!(!validate_schedule(&sched, 1000).unwrap().summable);
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let res = solve_bilevel(&p, &sched, &x0, &config(100), &[]).unwrap();
    assert_eq!(res.status, Status::MaxIters);
    let rep = step_decay_audit(&res.traces, &AuditOptions::default());
    assert!(!rep.passed);
    assert!(rep.diagnostic.contains("final step"));
}

#[test]
fn lambda_at_theta_is_rejected_before_iterating() {
    let p = bilevel_quadratic();
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let err = solve_bilevel(&p, &Schedule::standard(1.0, 2.0, 0.5, 0.5), &x0, &config(10), &[]).unwrap_err();
    assert!(matches!(err, Error::Configuration(_)));
}

#[test]
fn iterates_stay_feasible_and_bounded() {
    let p = bilevel_quadratic();
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let sched = Schedule::standard(1.0, 2.0, 1.0, 0.0);
    let short = solve_bilevel(&p, &sched, &x0, &config(100), &[]).unwrap();
    let long = solve_bilevel(&p, &sched, &x0, &config(1000), &[]).unwrap();
    for t in &long.traces {
        assert!(p.omega.contains(&t.x_next));
    }
    assert!((long.max_dist_from_x0 - short.max_dist_from_x0).abs() < 1e-2);
}

#[test]
fn runs_are_deterministic_and_thin_mode_keeps_every_tenth() {
    let p = bilevel_quadratic();
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let sched = Schedule::standard(1.0, 2.0, 1.0, 0.0);
    let a = solve_bilevel(&p, &sched, &x0, &config(40), &[]).unwrap();
    let b = solve_bilevel(&p, &sched, &x0, &config(40), &[]).unwrap();
    assert_eq!(format!("{:?}", a.traces), format!("{:?}", b.traces));
    let mut cfg = config(40);
    cfg.trace_mode = TraceMode::Thin;
    let thin = solve_bilevel(&p, &sched, &x0, &cfg, &[]).unwrap();
    let ks: Vec<usize> = thin.traces.iter().map(|t| t.k).collect();
    assert_eq!(ks, vec![0, 10, 20, 30, 39]);
}

#[test]
fn strategies_produce_the_same_trajectory() {
    let p = bilevel_quadratic();
    let x0 = plane().point(vec![3.0, -2.0]).unwrap();
    let sched = Schedule::standard(1.0, 2.0, 1.0, 0.0);
    let mut runs = Vec::new();
    for s in [Strategy::ProxMin, Strategy::Extragradient] {
        let mut cfg = config(20);
        cfg.inner.strategy = s;
        cfg.inner.tol = 1e-9;
        runs.push(solve_bilevel(&p, &sched, &x0, &cfg, &[]).unwrap());
    }
    for (a, b) in runs[0].traces.iter().zip(&runs[1].traces) {
        assert!(plane().dist(&a.x_next, &b.x_next).unwrap() <= 1e-6);
    }
}

#[test]
fn schedule_validation_examples() {
    assert!(validate_schedule(&Schedule::standard(1.0, 2.0, 1.0, 0.0), 10_000_000).unwrap().passed);
    assert!(!validate_schedule(&Schedule::standard(1.0, 1.0, 1.0, 0.0), 10_000_000).unwrap().passed);
}
