//! The outer loop, its schedules and the convergence audits.

mod audit;
mod schedule;
mod solver;

pub use audit::{
    fejer_audit, limsup_condition_audit, step_decay_audit, AuditOptions, FejerReport, LimsupEntry, LimsupReport,
    RhoRule, StepDecayReport, FEJER_SLACK,
};
pub use schedule::{validate_schedule, Schedule, ScheduleReport, Sequence, STABILIZATION_TOL};
pub use solver::{
    solve_bilevel, BilevelProblem, InnerConfig, InnerSummary, IterationTrace, SolveResult, SolverConfig, Status,
    TraceMode,
};
