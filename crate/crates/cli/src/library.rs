//! Problems shipped with the binary.

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy)]
pub struct ProblemLibraryEntry {
    pub name: &'static str,
    pub source: &'static str,
    /// Wall-clock budget for one run at desk scale.
    pub budget_secs: f64,
}

/// What a finished run is expected to show.
#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    /// `x_final` within `tol` of `point` (intrinsic coordinates).
    Solution { point: Vec<f64>, tol: f64 },
    /// A successful status with no reference solution.
    Converged,
}

impl ProblemLibraryEntry {
    pub fn config(&self) -> RunConfig {
        RunConfig::parse(self.source).expect("library configs parse")
    }

    pub fn description(&self) -> String {
        self.config().description
    }

    pub fn expected(&self) -> Expected {
        let cfg = self.config();
        match cfg.problem.known_solution {
            Some(p) => Expected::Solution { point: p.into_inner(), tol: cfg.problem.solution_tol },
            None => Expected::Converged,
        }
    }
}

macro_rules! entry {
    ($name:literal, $budget:expr) => {
        ProblemLibraryEntry {
            name: $name,
            source: include_str!(concat!("../problems/", $name, ".toml")),
            budget_secs: $budget,
        }
    };
}

pub const LIBRARY: &[ProblemLibraryEntry] = &[
    entry!("bilevel_quadratic", 60.0),
    entry!("routine_formation", 60.0),
    entry!("classical_prox", 60.0),
    entry!("hyperbolic_median", 60.0),
    entry!("undermonotone_vi", 60.0),
];

pub fn find(name: &str) -> Option<&'static ProblemLibraryEntry> {
    let stem = name.strip_suffix(".toml").unwrap_or(name);
    LIBRARY.iter().find(|e| e.name == stem)
}

/// One line per entry, or an explicit notice for an empty library.
pub fn listing(entries: &[ProblemLibraryEntry]) -> String {
    if entries.is_empty() {
        return "no problems registered\n".into();
    }
    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    entries
        .iter()
        .map(|e| format!("{:width$}  {}\n", e.name, e.description()))
        .collect()
}
