//! Sample-based checkers: monotonicity classes, EP residuals and the
//! existence assumptions. Sampling can falsify a property but never certify it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bifunction::Bifunction;
use super::constraint::ConstraintSet;
use crate::bregman::BregmanFunction;
use crate::error::Result;
use crate::manifold::Point;
use crate::scalar::Scalar;
use crate::subsolver::{geodesic_descent, Armijo, FnObjective};

/// Slack allowed in every monotonicity inequality.
pub const CLASS_TOL: f64 = 1e-10;

const SAMPLING_NOTE: &str = "sample-based falsification; a pass is not a proof";

/// Infimum of `K(x, ·)` over probe points of `Ω`.
#[derive(Clone, Debug, Serialize)]
pub struct EPResidual<S> {
    pub gap: S,
    pub worst_y: Point<S>,
    pub probes: usize,
}

impl<S: Scalar> EPResidual<S> {
    /// `x` is accepted as an EP member at tolerance `tau` iff `gap >= -tau`.
    pub fn accepts(&self, tau: S) -> bool {
        self.gap >= -tau
    }
}

/// Estimates `inf_{y ∈ Ω} K(x, y)`.
///
/// Probes are `x` itself, `probes` random members of `Ω` and a few points close
/// to `x`. With `local_minimize`, a projected descent on `y ↦ K(x, y)` is run
/// from the worst probe and from `x`.
pub fn ep_residual<S: Scalar, R: Rng + ?Sized>(
    k: &Bifunction<S>,
    omega: &ConstraintSet<S>,
    x: &Point<S>,
    probes: usize,
    local_minimize: bool,
    rng: &mut R,
) -> Result<EPResidual<S>> {
    let m = *omega.manifold();
    let mut best = (S::zero(), x.clone());
    let mut count = 1;
    let consider = |y: Point<S>, best: &mut (S, Point<S>)| -> Result<()> {
        let v = k.eval(x, &y)?;
        if v < best.0 {
            *best = (v, y);
        }
        Ok(())
    };
    for _ in 0..probes {
        consider(omega.sample(rng), &mut best)?;
        count += 1;
    }
    for scale in [1e-2, 1e-4] {
        let v = m.random_direction(rng, x, S::lit(scale));
        consider(omega.project(&m.exp(x, &v)?)?, &mut best)?;
        count += 1;
    }
    if local_minimize && k.has_gradient() {
        let objective = FnObjective::new(|y: &Point<S>| k.eval(x, y), |y: &Point<S>| k.grad_second(x, y));
        let starts = [best.1.clone(), x.clone()];
        for start in starts.iter() {
            let out = geodesic_descent(&objective, omega, start, S::lit(1e-12), 500, &Armijo::default())?;
            count += out.iterations;
            if out.value < best.0 {
                best = (out.value, out.x);
            }
        }
    }
    Ok(EPResidual {
        gap: best.0,
        worst_y: best.1,
        probes: count,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

/// Verdict for one inequality over all sampled pairs.
#[derive(Clone, Debug, Serialize)]
pub struct ClassCheck {
    pub passed: bool,
    /// Largest violation margin observed (positive means violated).
    pub worst: f64,
    pub counterexample: Option<Counterexample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub theta: f64,
    pub monotone: ClassCheck,
    pub pseudomonotone: ClassCheck,
    pub undermonotone: ClassCheck,
    pub note: &'static str,
}

struct PairEval {
    x: Vec<f64>,
    y: Vec<f64>,
    kxy: f64,
    kyx: f64,
    pairing: f64,
}

fn fold_check(evals: &[PairEval], margin: impl Fn(&PairEval) -> f64) -> ClassCheck {
    let mut worst = f64::NEG_INFINITY;
    let mut counterexample = None;
    for e in evals {
        let v = margin(e);
        if v > worst {
            worst = v;
        }
        if (v > 0.0 || v.is_nan()) && counterexample.is_none() {
            counterexample = Some(Counterexample {
                x: e.x.clone(),
                y: e.y.clone(),
                value: v,
            });
        }
    }
    ClassCheck {
        passed: counterexample.is_none(),
        worst,
        counterexample,
    }
}

/// Tests the monotone, pseudomonotone and θ-undermonotone inequalities on
/// `samples` random pairs of `Ω` drawn from `seed`.
pub fn check_monotonicity_class<S: Scalar>(
    k: &Bifunction<S>,
    omega: &ConstraintSet<S>,
    b: &BregmanFunction<S>,
    theta: f64,
    samples: usize,
    seed: u64,
) -> MonotonicityReport {
    let samples = samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Point<S>, Point<S>)> = (0..samples)
        .map(|_| (omega.sample(&mut rng), omega.sample(&mut rng)))
        .collect();
    let evals: Vec<PairEval> = pairs
        .par_iter()
        .map(|(x, y)| {
            let f = |r: Result<S>| r.map(|v| v.as_f64()).unwrap_or(f64::NAN);
            PairEval {
                x: x.coords().iter().map(|c| c.as_f64()).collect(),
                y: y.coords().iter().map(|c| c.as_f64()).collect(),
                kxy: f(k.eval(x, y)),
                kyx: f(k.eval(y, x)),
                pairing: f(b.gradient_pairing(x, y)),
            }
        })
        .collect();
    let monotone = fold_check(&evals, |e| e.kxy + e.kyx - CLASS_TOL);
    let pseudomonotone = fold_check(&evals, |e| {
        // K(x,y) >= 0 must force K(y,x) <= 0, in both orders
        let a = if e.kxy >= 0.0 { e.kyx - CLASS_TOL } else { f64::NEG_INFINITY };
        let b = if e.kyx >= 0.0 { e.kxy - CLASS_TOL } else { f64::NEG_INFINITY };
        a.max(b)
    });
    let undermonotone = fold_check(&evals, |e| e.kxy + e.kyx - theta * e.pairing - CLASS_TOL);
    MonotonicityReport {
        samples,
        theta,
        monotone,
        pseudomonotone,
        undermonotone,
        note: SAMPLING_NOTE,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdvisoryCheck {
    pub passed: bool,
    pub trials: usize,
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub hull_covering: AdvisoryCheck,
    pub divergent_escape: AdvisoryCheck,
    pub note: &'static str,
}

/// Finite probes of the two existence assumptions.
///
/// The first is read as `conv{y_i} ⊂ ∪ L_K(y_i)` for finite subsets of
/// `Ω_k = Ω ∩ B(z0, k)`, with `L_K(y) = {x ∈ Ω : K(y, x) <= 0}`. The second is
/// probed along geodesic rays `z^j = P_Ω(exp(z0, 2^j u))` leaving every ball.
pub fn check_assumptions_on_samples<S: Scalar>(
    k: &Bifunction<S>,
    omega: &ConstraintSet<S>,
    budget: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    let budget = budget.max(1);
    let m = *omega.manifold();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = omega.project(&m.origin())?;

    let mut worst_hull = f64::NEG_INFINITY;
    let mut trials_hull = 0;
    for radius in 1..=3 {
        let r = S::lit(radius as f64);
        for _ in 0..budget {
            let ys: Vec<Point<S>> = (0..3)
                .map(|_| {
                    let s = omega.sample(&mut rng);
                    let d = m.dist(&z0, &s)?;
                    if d <= r {
                        Ok(s)
                    } else {
                        m.geodesic_point(&z0, &s, r / d)
                    }
                })
                .collect::<Result<_>>()?;
            let t: f64 = rng.gen();
            let s: f64 = rng.gen();
            let p = m.geodesic_point(&m.geodesic_point(&ys[0], &ys[1], S::lit(t))?, &ys[2], S::lit(s))?;
            let mut best = f64::INFINITY;
            for y in &ys {
                best = best.min(k.eval(y, &p)?.as_f64());
            }
            worst_hull = worst_hull.max(best);
            trials_hull += 1;
        }
    }
    let passed_hull = worst_hull <= CLASS_TOL;
    let hull_covering = AdvisoryCheck {
        passed: passed_hull,
        trials: trials_hull,
        worst: worst_hull,
        detail: if passed_hull {
            "every sampled hull point lies in some L_K(y_i)".into()
        } else {
            "a sampled hull point lies outside every L_K(y_i)".into()
        },
    };

    let divergent_escape = if omega.is_bounded() {
        AdvisoryCheck {
            passed: true,
            trials: 0,
            worst: 0.0,
            detail: "Ω is bounded: no divergent sequences exist".into(),
        }
    } else {
        let candidates: Vec<Point<S>> = (0..budget).map(|_| omega.sample(&mut rng)).collect();
        let mut missing = 0usize;
        let steps = 8;
        for _ in 0..budget {
            let u = m.random_direction(&mut rng, &z0, S::one());
            let seq: Vec<Point<S>> = (1..=steps)
                .map(|j| omega.project(&m.exp(&z0, &u.scaled(S::lit(2f64.powi(j))))?))
                .collect::<Result<_>>()?;
            let tail = &seq[steps as usize / 2..];
            let mut found = false;
            for c in &candidates {
                let mut ok = true;
                for z in tail {
                    if k.eval(z, c)?.as_f64() > CLASS_TOL {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    found = true;
                    break;
                }
            }
            if !found {
                missing += 1;
            }
        }
        AdvisoryCheck {
            passed: missing == 0,
            trials: budget,
            worst: missing as f64 / budget as f64,
            detail: format!("{missing} of {budget} divergent rays had no candidate x* with K(z^k, x*) <= 0 on the tail"),
        }
    };

    Ok(AssumptionReport {
        hull_covering,
        divergent_escape,
        note: SAMPLING_NOTE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{ScalarField, VectorField};
    use crate::manifold::Manifold;

    fn plane() -> (Manifold, ConstraintSet<f64>, BregmanFunction<f64>) {
        let m = Manifold::euclidean(2);
        let omega = ConstraintSet::ball(m, m.origin(), 3.0).unwrap();
        (m, omega, BregmanFunction::squared_norm(m).unwrap())
    }

    fn norm_sq(m: Manifold) -> Bifunction<f64> {
        Bifunction::minimization(ScalarField::quadratic(m, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap())
    }

    #[test]
    fn minimization_is_monotone() {
        let (m, omega, b) = plane();
        let rep = check_monotonicity_class(&norm_sq(m), &omega, &b, 0.0, 500, 1);
        assert!(rep.monotone.passed && rep.pseudomonotone.passed && rep.undermonotone.passed);
        assert!(rep.monotone.worst <= -CLASS_TOL + 1e-15);
    }

    #[test]
    fn scaled_identity_is_pseudomonotone_not_monotone() {
        let (m, omega, b) = plane();
        let k = Bifunction::variational(VectorField::scaled_identity(m).unwrap());
        let rep = check_monotonicity_class(&k, &omega, &b, 0.0, 2000, 2);
        assert!(!rep.monotone.passed);
        let ce = rep.monotone.counterexample.as_ref().unwrap();
        let x = m.point(ce.x.clone()).unwrap();
        let y = m.point(ce.y.clone()).unwrap();
        assert!(k.eval(&x, &y).unwrap() + k.eval(&y, &x).unwrap() > CLASS_TOL);
        assert!(rep.pseudomonotone.passed);
    }

    #[test]
    fn psd_linear_field_is_monotone_and_large_theta_covers_anything() {
        let (m, omega, b) = plane();
        let psd = Bifunction::variational(
            VectorField::linear(m, vec![vec![2.0, 1.0], vec![1.0, 1.0]], vec![0.5, -1.0]).unwrap(),
        );
        assert!(check_monotonicity_class(&psd, &omega, &b, 0.0, 500, 3).monotone.passed);
        let indefinite = Bifunction::variational(
            VectorField::linear(m, vec![vec![-1.0, 0.0], vec![0.0, 2.0]], vec![0.0, 0.0]).unwrap(),
        );
        let rep = check_monotonicity_class(&indefinite, &omega, &b, 0.0, 500, 3);
        assert!(!rep.monotone.passed && !rep.undermonotone.passed);
        let rep = check_monotonicity_class(&indefinite, &omega, &b, 1.0, 500, 3);
        assert!(rep.undermonotone.passed);
    }

    #[test]
    fn reports_are_deterministic() {
        let (m, omega, b) = plane();
        let k = Bifunction::variational(VectorField::scaled_identity(m).unwrap());
        let a = check_monotonicity_class(&k, &omega, &b, 0.3, 300, 7);
        let c = check_monotonicity_class(&k, &omega, &b, 0.3, 300, 7);
        assert_eq!(format!("{a:?}"), format!("{c:?}"));
    }

    #[test]
    fn regularized_monotone_parts_stay_monotone() {
        let (m, omega, b) = plane();
        let f = Bifunction::variational(
            VectorField::linear(m, vec![vec![1.0, 0.5], vec![-0.5, 0.2]], vec![0.0, 1.0]).unwrap(),
        );
        let q = norm_sq(m);
        let l = Bifunction::regularized(&f, &q, 0.7, 0.4, m.point(vec![1.0, 1.0]).unwrap(), &b).unwrap();
        let rep = check_monotonicity_class(&l, &omega, &b, 0.0, 1000, 5);
        assert!(rep.monotone.passed, "{:?}", rep.monotone);
    }

    #[test]
    fn undermonotone_field_is_monotonized_at_lambda_theta() {
        let m = Manifold::euclidean(2);
        let omega = ConstraintSet::bounding_box(m, vec![0.2, 0.2], vec![3.0, 3.0]).unwrap();
        for b in [
            BregmanFunction::squared_norm(m).unwrap(),
            BregmanFunction::negative_entropy(m, 0.0).unwrap(),
        ] {
            let theta = 0.8;
            let v = VectorField::undermonotone(m, vec![vec![0.5, 0.0], vec![0.0, 0.0]], vec![1.0, 0.0], theta, &b)
                .unwrap();
            let f = Bifunction::variational(v);
            let rep = check_monotonicity_class(&f, &omega, &b, theta, 500, 9);
            assert!(rep.undermonotone.passed && !rep.monotone.passed);
            let l = Bifunction::regularized(&f, &norm_sq(m), 0.5, theta, m.point(vec![1.0, 2.0]).unwrap(), &b).unwrap();
            assert!(check_monotonicity_class(&l, &omega, &b, 0.0, 500, 9).monotone.passed);
        }
    }

    #[test]
    fn ep_residual_examples() {
        let (m, omega, _) = plane();
        let k = norm_sq(m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = ep_residual(&k, &omega, &m.origin(), 16, true, &mut rng).unwrap();
        assert!(r.gap >= 0.0);
        let x = m.point(vec![1.0, 0.0]).unwrap();
        let r = ep_residual(&k, &omega, &x, 16, true, &mut rng).unwrap();
        assert!(r.gap <= -1.0 + 1e-12);
        assert!(!r.accepts(1e-6));
        let zero = Bifunction::zero(m);
        assert_eq!(ep_residual(&zero, &omega, &x, 16, true, &mut rng).unwrap().gap, 0.0);
    }

    #[test]
    fn assumption_probes() {
        let (m, omega, _) = plane();
        let pseudo = Bifunction::variational(VectorField::scaled_identity(m).unwrap());
        let rep = check_assumptions_on_samples(&pseudo, &omega, 100, 1).unwrap();
        assert!(rep.hull_covering.passed, "{:?}", rep.hull_covering);
        let zero = Bifunction::zero(m);
        let whole = ConstraintSet::whole(m, 3.0).unwrap();
        let rep = check_assumptions_on_samples(&zero, &whole, 20, 1).unwrap();
        assert!(rep.hull_covering.passed && rep.divergent_escape.passed);
        let rep = check_assumptions_on_samples(&norm_sq(m), &whole, 20, 1).unwrap();
        assert!(rep.divergent_escape.passed, "{:?}", rep.divergent_escape);
        let concave = Bifunction::minimization(
            ScalarField::new(
                m,
                "neg",
                std::sync::Arc::new(|x: &Point<f64>| -x.coords().iter().map(|c| c * c).sum::<f64>()),
                std::sync::Arc::new(|x: &Point<f64>| x.coords().iter().map(|c| -2.0 * c).collect()),
            ),
        );
        let rep = check_assumptions_on_samples(&concave, &whole, 20, 1).unwrap();
        assert!(!rep.divergent_escape.passed);
    }
}
