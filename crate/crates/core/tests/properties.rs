use geoprox::equilibrium::{Bifunction, ConstraintSet, ScalarField, VectorField};
use geoprox::{BregmanFunction, Manifold, Point};
use proptest::prelude::*;

fn coords(dim: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, dim)
}

fn lift(m: &Manifold, c: &[f64]) -> Point {
    m.lift(c).unwrap()
}

fn backends() -> [Manifold; 2] {
    [Manifold::euclidean(2), Manifold::hyperboloid(2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exp_inverts_log(a in coords(2, 3.0), b in coords(2, 3.0)) {
        for m in backends() {
            let (x, y) = (lift(&m, &a), lift(&m, &b));
            let v = m.log(&x, &y).unwrap();
            let back = m.exp(&x, &v).unwrap();
            let d = m.dist(&back, &y).unwrap();
            prop_assert!(d <= 1e-9 * (1.0 + m.norm(&v)), "{:?} drift {d}", m.kind());
            prop_assert!((m.norm(&v) - m.dist(&x, &y).unwrap()).abs() <= 1e-9 * (1.0 + m.norm(&v)));
        }
    }

    #[test]
    fn distance_is_a_metric(a in coords(2, 3.0), b in coords(2, 3.0), c in coords(2, 3.0)) {
        for m in backends() {
            let (x, y, z) = (lift(&m, &a), lift(&m, &b), lift(&m, &c));
            let dxy = m.dist(&x, &y).unwrap();
            prop_assert!(dxy >= 0.0);
            prop_assert!((dxy - m.dist(&y, &x).unwrap()).abs() <= 1e-12 * (1.0 + dxy));
            prop_assert!(m.dist(&x, &z).unwrap() <= dxy + m.dist(&y, &z).unwrap() + 1e-10);
        }
    }

    #[test]
    fn transport_is_an_isometry(a in coords(2, 3.0), b in coords(2, 3.0), u in coords(2, 2.0), w in coords(2, 2.0)) {
        for m in backends() {
            let (x, y) = (lift(&m, &a), lift(&m, &b));
            let basis = m.tangent_basis(&x);
            let mk = |c: &[f64]| basis[0].scaled(c[0]).add(&basis[1].scaled(c[1])).unwrap();
            let (p, q) = (mk(&u), mk(&w));
            let before = m.inner(&x, &p, &q).unwrap();
            let pt = m.parallel_transport(&x, &y, &p).unwrap();
            let qt = m.parallel_transport(&x, &y, &q).unwrap();
            let after = m.inner(&y, &pt, &qt).unwrap();
            prop_assert!((before - after).abs() <= 1e-8 * (1.0 + before.abs()), "{before} vs {after}");
        }
    }

    #[test]
    fn bregman_distance_is_nonnegative_and_vanishes_on_diagonal(a in coords(2, 3.0), b in coords(2, 3.0), z in coords(2, 2.0)) {
        for m in backends() {
            let h = BregmanFunction::energy(m, lift(&m, &z));
            let aug = h.augmented(lift(&m, &b));
            let (x, y) = (lift(&m, &a), lift(&m, &b));
            for f in [&h, &aug] {
                prop_assert!(f.divergence(&x, &y).unwrap() >= -1e-10);
                prop_assert!(f.divergence(&x, &x).unwrap().abs() <= 1e-12);
            }
        }
        let e = Manifold::euclidean(2);
        let ent = BregmanFunction::negative_entropy(e, 0.0).unwrap();
        let pos = |c: &[f64]| lift(&e, &c.iter().map(|v| v.abs() + 0.01).collect::<Vec<_>>());
        let (x, y) = (pos(&a), pos(&b));
        prop_assert!(ent.divergence(&x, &y).unwrap() >= -1e-12);
    }

    #[test]
    fn bifunctions_vanish_on_diagonal(a in coords(2, 3.0), c in coords(2, 2.0)) {
        for m in backends() {
            let x = lift(&m, &a);
            let anchor = lift(&m, &c);
            let min = Bifunction::minimization(ScalarField::squared_distance(m, anchor.clone()));
            let vi = Bifunction::variational(VectorField::median(m, vec![anchor, m.origin()]));
            prop_assert_eq!(min.eval(&x, &x).unwrap(), 0.0);
            prop_assert!(vi.eval(&x, &x).unwrap().abs() <= 1e-14);
        }
    }

    #[test]
    fn projection_is_idempotent(a in coords(2, 8.0)) {
        let e = Manifold::euclidean(2);
        let boxed = ConstraintSet::bounding_box(e, vec![-1.0, 0.0], vec![2.0, 1.0]).unwrap();
        for m in backends() {
            let ball = ConstraintSet::ball(m, lift(&m, &[0.5, -0.5]), 1.5).unwrap();
            let p = ball.project(&lift(&m, &a)).unwrap();
            prop_assert!(ball.contains(&p));
            prop_assert!(m.dist(&ball.project(&p).unwrap(), &p).unwrap() <= 1e-12);
        }
        let p = boxed.project(&lift(&e, &a)).unwrap();
        prop_assert!(boxed.contains(&p));
        let again = boxed.project(&p).unwrap();
        prop_assert_eq!(again.coords(), p.coords());
    }
}
