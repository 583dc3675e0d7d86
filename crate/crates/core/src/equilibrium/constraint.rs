//! Closed convex constraint sets with closed-form metric projections.

use rand::Rng;
use serde::Serialize;

use crate::bregman::Zone;
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{Manifold, ManifoldKind, Point};
use crate::scalar::Scalar;

/// Membership slack used by [`ConstraintSet::contains`].
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape<S> {
    /// The whole manifold; samples are drawn from a ball of `sample_radius` around the origin.
    Whole { sample_radius: S },
    /// Euclidean box `lower <= x <= upper`.
    Box { lower: Vec<S>, upper: Vec<S> },
    /// Closed geodesic ball.
    Ball { center: Point<S>, radius: S },
    /// Euclidean half-space `<normal, x> <= offset`.
    HalfSpace { normal: Vec<S>, offset: S, sample_radius: S },
}

/// A nonempty closed convex set `Ω`.
#[derive(Clone, Debug, Serialize)]
pub struct ConstraintSet<S> {
    #[serde(skip)]
    manifold: Manifold,
    shape: Shape<S>,
}

impl<S: Scalar> ConstraintSet<S> {
    pub fn whole(manifold: Manifold, sample_radius: S) -> Result<Self> {
        if !(sample_radius > S::zero()) {
            return Err(Error::Parameter("sample radius must be positive".into()));
        }
        Ok(Self {
            manifold,
            shape: Shape::Whole { sample_radius },
        })
    }

    pub fn bounding_box(manifold: Manifold, lower: Vec<S>, upper: Vec<S>) -> Result<Self> {
        if manifold.kind() != ManifoldKind::Euclidean {
            return Err(Error::Configuration("box constraints need the euclidean backend".into()));
        }
        if lower.len() != manifold.dim() || upper.len() != manifold.dim() {
            return Err(Error::DimensionMismatch {
                expected: manifold.dim(),
                found: lower.len().min(upper.len()),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Parameter("box needs lower <= upper componentwise".into()));
        }
        Ok(Self {
            manifold,
            shape: Shape::Box { lower, upper },
        })
    }

    pub fn ball(manifold: Manifold, center: Point<S>, radius: S) -> Result<Self> {
        if center.coords().len() != manifold.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: manifold.ambient_dim(),
                found: center.coords().len(),
            });
        }
        if !(radius > S::zero()) {
            return Err(Error::Parameter("ball radius must be positive".into()));
        }
        Ok(Self {
            manifold,
            shape: Shape::Ball { center, radius },
        })
    }

    pub fn half_space(manifold: Manifold, normal: Vec<S>, offset: S, sample_radius: S) -> Result<Self> {
        if manifold.kind() != ManifoldKind::Euclidean {
            return Err(Error::Configuration("half-spaces need the euclidean backend".into()));
        }
        if normal.len() != manifold.dim() {
            return Err(Error::DimensionMismatch {
                expected: manifold.dim(),
                found: normal.len(),
            });
        }
        if linalg::norm(&normal) <= S::zero() {
            return Err(Error::Parameter("half-space normal must be nonzero".into()));
        }
        Ok(Self {
            manifold,
            shape: Shape::HalfSpace {
                normal,
                offset,
                sample_radius,
            },
        })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn shape(&self) -> &Shape<S> {
        &self.shape
    }

    pub fn description(&self) -> String {
        match &self.shape {
            Shape::Whole { .. } => format!("whole {}", self.manifold.kind()),
            Shape::Box { lower, upper } => format!("box {lower:?} .. {upper:?}"),
            Shape::Ball { center, radius } => format!("ball(center={:?}, r={radius})", center.coords()),
            Shape::HalfSpace { normal, offset, .. } => format!("half-space <{normal:?}, x> <= {offset}"),
        }
    }

    /// Bounded sets have no divergent sequences.
    pub fn is_bounded(&self) -> bool {
        matches!(self.shape, Shape::Box { .. } | Shape::Ball { .. })
    }

    pub fn contains(&self, x: &Point<S>) -> bool {
        let tol = S::lit(MEMBERSHIP_TOL);
        match &self.shape {
            Shape::Whole { .. } => true,
            Shape::Box { lower, upper } => x
                .coords()
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&c, (&l, &u))| c >= l - tol && c <= u + tol),
            Shape::Ball { center, radius } => match self.manifold.dist(x, center) {
                Ok(d) => d <= *radius + tol * (S::one() + *radius),
                Err(_) => false,
            },
            Shape::HalfSpace { normal, offset, .. } => {
                linalg::dot(normal, x.coords()) <= *offset + tol * (S::one() + offset.abs())
            }
        }
    }

    /// Metric projection onto the set.
    pub fn project(&self, x: &Point<S>) -> Result<Point<S>> {
        match &self.shape {
            Shape::Whole { .. } => Ok(x.clone()),
            Shape::Box { lower, upper } => Ok(Point::from_raw(
                x.coords()
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&c, (&l, &u))| c.max(l).min(u))
                    .collect(),
            )),
            Shape::Ball { center, radius } => {
                let d = self.manifold.dist(center, x)?;
                if d <= *radius {
                    Ok(x.clone())
                } else {
                    let v = self.manifold.log(center, x)?;
                    self.manifold.exp(center, &v.scaled(*radius / d))
                }
            }
            Shape::HalfSpace { normal, offset, .. } => {
                let excess = linalg::dot(normal, x.coords()) - *offset;
                if excess <= S::zero() {
                    Ok(x.clone())
                } else {
                    let nn = linalg::dot(normal, normal);
                    Ok(Point::from_raw(linalg::axpy(-excess / nn, normal, x.coords())))
                }
            }
        }
    }

    /// Random member of the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<S> {
        let m = &self.manifold;
        match &self.shape {
            Shape::Whole { sample_radius } => m.random_point(rng, &m.origin(), *sample_radius),
            Shape::Box { lower, upper } => Point::from_raw(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| {
                        let t: f64 = rng.gen();
                        l + (u - l) * S::lit(t)
                    })
                    .collect(),
            ),
            Shape::Ball { center, radius } => m.random_point(rng, center, *radius),
            Shape::HalfSpace { sample_radius, .. } => {
                let p = m.random_point(rng, &m.origin(), *sample_radius);
                self.project(&p).expect("half-space projection is total")
            }
        }
    }

    /// Conservative check that `Ω` lies inside the zone `S`.
    pub fn within_zone(&self, zone: &Zone<S>) -> bool {
        match zone {
            Zone::Whole => true,
            Zone::PositiveOrthant { margin } => match &self.shape {
                Shape::Box { lower, .. } => lower.iter().all(|l| l > margin),
                Shape::Ball { center, radius } if self.manifold.kind() == ManifoldKind::Euclidean => {
                    center.coords().iter().all(|&c| c - *radius > *margin)
                }
                _ => false,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sets() -> Vec<ConstraintSet<f64>> {
        let e = Manifold::euclidean(2);
        let h = Manifold::hyperboloid(2);
        vec![
            ConstraintSet::whole(e, 3.0).unwrap(),
            ConstraintSet::bounding_box(e, vec![-1.0, 0.5], vec![2.0, 1.5]).unwrap(),
            ConstraintSet::ball(e, e.point(vec![1.0, -1.0]).unwrap(), 1.5).unwrap(),
            ConstraintSet::half_space(e, vec![1.0, 2.0], 0.5, 4.0).unwrap(),
            ConstraintSet::ball(h, h.lift(&[0.3, -0.2]).unwrap(), 1.0).unwrap(),
        ]
    }

    #[test]
    fn projection_lands_in_set_and_is_idempotent() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for set in sets() {
            let m = *set.manifold();
            for _ in 0..200 {
                let x = m.random_point(&mut r, &m.origin(), 6.0);
                let p = set.project(&x).unwrap();
                assert!(set.contains(&p), "{}", set.description());
                let pp = set.project(&p).unwrap();
                assert!(m.dist(&p, &pp).unwrap() <= 1e-10);
                let s = set.sample(&mut r);
                assert!(set.contains(&s));
                assert!(m.dist(&set.project(&s).unwrap(), &s).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn projection_is_nearest_point() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for set in sets() {
            let m = *set.manifold();
            for _ in 0..50 {
                let x = m.random_point(&mut r, &m.origin(), 6.0);
                let p = set.project(&x).unwrap();
                let dp = m.dist(&x, &p).unwrap();
                for _ in 0..20 {
                    let s = set.sample(&mut r);
                    assert!(m.dist(&x, &s).unwrap() >= dp - 1e-9);
                }
            }
        }
    }

    #[test]
    fn geodesic_midpoints_of_members_are_members() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        for set in sets() {
            let m = *set.manifold();
            for _ in 0..200 {
                let a = set.sample(&mut r);
                let b = set.sample(&mut r);
                assert!(set.contains(&m.geodesic_point(&a, &b, 0.5).unwrap()));
            }
        }
    }

    #[test]
    fn box_projection_clamps() {
        let e = Manifold::euclidean(2);
        let set = ConstraintSet::bounding_box(e, vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let p = set.project(&e.point(vec![7.0, -1.0]).unwrap()).unwrap();
        assert_eq!(p.coords(), &[5.0, -1.0]);
    }

    #[test]
    fn zone_containment() {
        let e = Manifold::euclidean(2);
        let zone = Zone::PositiveOrthant { margin: 0.0 };
        let inside = ConstraintSet::bounding_box(e, vec![0.1, 0.1], vec![2.0, 2.0]).unwrap();
        let touching = ConstraintSet::bounding_box(e, vec![0.0, 0.1], vec![2.0, 2.0]).unwrap();
        assert!(inside.within_zone(&zone));
        assert!(!touching.within_zone(&zone));
        assert!(!ConstraintSet::whole(e, 1.0).unwrap().within_zone(&zone));
    }
}
