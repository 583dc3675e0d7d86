//! Bregman proximal point methods for bilevel equilibrium problems on Hadamard manifolds.
//!
//! Every numerical type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

pub mod bilevel;
pub mod bregman;
pub mod equilibrium;
pub mod error;
mod linalg;
pub mod manifold;
pub mod scalar;
pub mod subsolver;

pub use error::{Error, Result};
pub use manifold::{ManifoldKind, Manifold};
pub use scalar::Scalar;

pub type Point = manifold::Point<f64>;
pub type TangentVector = manifold::TangentVector<f64>;
pub type BregmanFunction = bregman::BregmanFunction<f64>;
pub type Bifunction = equilibrium::Bifunction<f64>;
pub type ConstraintSet = equilibrium::ConstraintSet<f64>;
pub type ScalarField = equilibrium::ScalarField<f64>;
pub type VectorField = equilibrium::VectorField<f64>;
pub type EPResidual = equilibrium::EPResidual<f64>;
pub type InnerProblem = subsolver::InnerProblem<f64>;
pub type InnerSolution = subsolver::InnerSolution<f64>;
pub type BilevelProblem = bilevel::BilevelProblem<f64>;
pub type SolveResult = bilevel::SolveResult<f64>;
pub type IterationTrace = bilevel::IterationTrace<f64>;
