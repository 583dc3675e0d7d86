//! Bifunctions, constraint sets and the checkers built on them.

mod bifunction;
mod checks;
mod constraint;
mod fields;

pub use bifunction::{
    make_minimization_bifunction, make_vi_bifunction, regularized_bifunction, BiFn, BiGradFn, Bifunction,
    MonotonicityClass, Regularized,
};
pub use checks::{
    check_assumptions_on_samples, check_monotonicity_class, ep_residual, AdvisoryCheck, AssumptionReport,
    ClassCheck, Counterexample, EPResidual, MonotonicityReport, CLASS_TOL,
};
pub use constraint::{ConstraintSet, Shape, MEMBERSHIP_TOL};
pub use fields::{ScalarField, VectorField};
