//! TOML run configuration and its assembly into solver objects.

use std::fmt;
use std::path::PathBuf;

use geoprox::bilevel::{InnerConfig, RhoRule, Schedule, SolverConfig, TraceMode};
use geoprox::equilibrium::MonotonicityClass;
use geoprox::subsolver::{Armijo, Strategy};
use geoprox::{
    Bifunction, BilevelProblem, BregmanFunction, ConstraintSet, Manifold, ManifoldKind, Point, ScalarField, VectorField,
};
use serde::Deserialize;
use toml::Spanned;

/// A parse or validation error, anchored to a line of the config text when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    pub manifold: ManifoldSpec,
    pub bregman: Spanned<BregmanSpec>,
    pub problem: ProblemSpec,
    pub schedule: Spanned<ScheduleSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub audit: AuditSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldName {
    Euclidean,
    Hyperboloid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldName,
    pub dim: Spanned<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BregmanName {
    Sqnorm,
    Negentropy,
    Energy,
    Augmented,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BregmanSpec {
    pub name: BregmanName,
    /// energy: anchor point (intrinsic coordinates), origin when absent
    pub anchor: Option<Vec<f64>>,
    /// negentropy: zone margin
    pub margin: Option<f64>,
    /// augmented: name of the base function
    pub base: Option<BregmanName>,
    /// augmented: center of the added squared distance
    pub center: Option<Vec<f64>>,
}

/// Builders for `F` and `Q`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BifunctionSpec {
    Zero,
    /// minimization type, `Σ w_i (x_i - c_i)²`
    Quadratic { center: Vec<f64>, weights: Vec<f64> },
    /// minimization type, `<c, x>`
    Linear { c: Vec<f64> },
    /// minimization type, `½ d²(x, anchor)`
    SquaredDistance { anchor: Vec<f64> },
    /// minimization type, `Σ d(x, a_i)`
    SumOfDistances { anchors: Vec<Vec<f64>> },
    /// VI type, `A x + b`
    LinearField { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// VI type, `M x + b - θ grad h(x)` with `h` the run's Bregman function
    UndermonotoneField { matrix: Vec<Vec<f64>>, offset: Vec<f64>, theta: f64 },
    /// VI type, gradient field of `Σ d(x, a_i)`
    MedianField { anchors: Vec<Vec<f64>> },
    /// VI type, `x / (1 + |x|²)`
    ScaledIdentity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    Whole { sample_radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    HalfSpace { normal: Vec<f64>, offset: f64, sample_radius: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub f: Spanned<BifunctionSpec>,
    pub q: Spanned<BifunctionSpec>,
    pub omega: Spanned<OmegaSpec>,
    /// Starting point; sampled from Ω with the run seed when absent.
    pub x0: Option<Spanned<Vec<f64>>>,
    pub known_solution: Option<Spanned<Vec<f64>>>,
    #[serde(default = "default_solution_tol")]
    pub solution_tol: f64,
}

fn default_solution_tol() -> f64 {
    1e-3
}

/// `μ_k = mu0 (k+1)^{-p}`, `λ_k = lambda0`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub mu0: f64,
    pub p: f64,
    pub lambda0: f64,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub max_iters: usize,
    pub tau_step: f64,
    pub tau: f64,
    pub ep_probes: usize,
    pub strategy: Strategy,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub divergence_radius: Option<f64>,
    pub residual_probes: usize,
    pub armijo: Armijo,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            max_iters: s.max_iters,
            tau_step: s.tau_step,
            tau: s.tau,
            ep_probes: s.ep_probes,
            strategy: s.inner.strategy,
            inner_tol: s.inner.tol,
            inner_max_iters: s.inner.max_iters,
            divergence_radius: s.inner.divergence_radius,
            residual_probes: s.inner.residual_probes,
            armijo: s.inner.armijo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoName {
    SupBound,
    ProofFormula,
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    /// Members of `EP(F, Ω)` for the Fejér and limsup audits; the known solution is used when empty.
    pub references: Vec<Vec<f64>>,
    pub rho: RhoName,
    pub tail_tol: f64,
    pub limsup_tol: f64,
    pub step_tol: f64,
    /// Horizon of the schedule validation.
    pub horizon: usize,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self {
            references: Vec::new(),
            rho: RhoName::ProofFormula,
            tail_tol: 1e-3,
            limsup_tol: 1e-3,
            step_tol: 1e-6,
            horizon: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub trace: Option<TraceMode>,
}

/// Everything needed for one solve.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub manifold: Manifold,
    pub problem: BilevelProblem,
    pub schedule: Schedule,
    pub solver: SolverConfig,
    pub x0: Option<Point>,
    pub known_solution: Option<Point>,
    pub references: Vec<Point>,
    pub rho: RhoRule,
}

struct Ctx<'a> {
    src: &'a str,
    manifold: Manifold,
}

impl Ctx<'_> {
    fn err(&self, span: std::ops::Range<usize>, msg: impl Into<String>) -> ConfigError {
        ConfigError { line: Some(line_of(self.src, span.start)), message: msg.into() }
    }

    fn point(&self, span: std::ops::Range<usize>, what: &str, c: &[f64]) -> Result<Point, ConfigError> {
        let n = self.manifold.dim();
        if c.len() != n {
            return Err(self.err(span, format!("{what} has {} coordinates, manifold dimension is {n}", c.len())));
        }
        self.manifold.lift(c).map_err(|e| self.err(span, format!("{what}: {e}")))
    }

    fn vector(&self, span: std::ops::Range<usize>, what: &str, c: &[f64]) -> Result<(), ConfigError> {
        let n = self.manifold.dim();
        if c.len() != n {
            return Err(self.err(span, format!("{what} has {} entries, manifold dimension is {n}", c.len())));
        }
        Ok(())
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl RunConfig {
    /// Parses TOML text. Syntax and schema errors carry the offending line.
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e: toml::de::Error| ConfigError {
            line: e.span().map(|s| line_of(src, s.start)),
            message: e.message().to_string(),
        })
    }

    /// Validates the config against `src` (the text it was parsed from) and builds the solver objects.
    pub fn assemble(&self, src: &str) -> Result<Assembled, ConfigError> {
        let dim = *self.manifold.dim.get_ref();
        let kind = match self.manifold.kind {
            ManifoldName::Euclidean => ManifoldKind::Euclidean,
            ManifoldName::Hyperboloid => ManifoldKind::Hyperboloid,
        };
        let manifold = Manifold::new(kind, dim).map_err(|e| ConfigError {
            line: Some(line_of(src, self.manifold.dim.span().start)),
            message: e.to_string(),
        })?;
        let ctx = Ctx { src, manifold };

        let bspan = self.bregman.span();
        let bregman = build_bregman(&ctx, bspan.clone(), self.bregman.get_ref(), false)?;
        let f = build_bifunction(&ctx, &self.problem.f, &bregman, "F")?;
        let q = build_bifunction(&ctx, &self.problem.q, &bregman, "Q")?;
        let omega = build_omega(&ctx, &self.problem.omega)?;
        let problem = BilevelProblem::new(f, q, omega, bregman)
            .map_err(|e| ctx.err(self.problem.omega.span(), e.to_string()))?;

        let s = self.schedule.get_ref();
        let schedule = Schedule::standard(s.mu0, s.p, s.lambda0, s.theta);
        let solver = self.solver_config();
        schedule
            .check_admissible(solver.max_iters)
            .map_err(|e| ctx.err(self.schedule.span(), format!("{e} (well-definedness needs theta < lambda_k for every k)")))?;

        let x0 = match &self.problem.x0 {
            Some(c) => {
                let p = ctx.point(c.span(), "x0", c.get_ref())?;
                if !problem.omega.contains(&p) {
                    return Err(ctx.err(c.span(), "x0 is not in Ω"));
                }
                Some(p)
            }
            None => None,
        };
        let known_solution = match &self.problem.known_solution {
            Some(c) => Some(ctx.point(c.span(), "known_solution", c.get_ref())?),
            None => None,
        };
        let mut references = Vec::new();
        for (i, r) in self.audit.references.iter().enumerate() {
            let n = manifold.dim();
            if r.len() != n {
                return Err(ConfigError {
                    line: None,
                    message: format!("audit.references[{i}] has {} coordinates, manifold dimension is {n}", r.len()),
                });
            }
            references.push(manifold.lift(r).map_err(|e| ConfigError { line: None, message: e.to_string() })?);
        }
        if references.is_empty() {
            references.extend(known_solution.clone());
        }
        let rho = match self.audit.rho {
            RhoName::SupBound => RhoRule::SupBound,
            RhoName::ProofFormula => RhoRule::ProofFormula,
            RhoName::Zero => RhoRule::Zero,
        };
        Ok(Assembled { manifold, problem, schedule, solver, x0, known_solution, references, rho })
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            max_iters: s.max_iters,
            tau_step: s.tau_step,
            tau: s.tau,
            ep_probes: s.ep_probes,
            inner: InnerConfig {
                strategy: s.strategy,
                tol: s.inner_tol,
                max_iters: s.inner_max_iters,
                armijo: s.armijo,
                divergence_radius: s.divergence_radius,
                residual_probes: s.residual_probes,
            },
            trace_mode: self.output.trace.unwrap_or(TraceMode::Full),
            seed: self.seed,
        }
    }
}

fn build_bregman(
    ctx: &Ctx,
    span: std::ops::Range<usize>,
    spec: &BregmanSpec,
    nested: bool,
) -> Result<BregmanFunction, ConfigError> {
    let m = ctx.manifold;
    let wrap = |e: geoprox::Error| ctx.err(span.clone(), format!("bregman: {e}"));
    Ok(match spec.name {
        BregmanName::Sqnorm => BregmanFunction::squared_norm(m).map_err(wrap)?,
        BregmanName::Negentropy => BregmanFunction::negative_entropy(m, spec.margin.unwrap_or(0.0)).map_err(wrap)?,
        BregmanName::Energy => {
            let anchor = match &spec.anchor {
                Some(a) => ctx.point(span.clone(), "bregman.anchor", a)?,
                None => m.origin(),
            };
            BregmanFunction::energy(m, anchor)
        }
        BregmanName::Augmented => {
            if nested {
                return Err(ctx.err(span, "augmented cannot be its own base"));
            }
            let base = spec
                .base
                .ok_or_else(|| ctx.err(span.clone(), "augmented needs `base` (sqnorm, negentropy or energy)"))?;
            let center = spec
                .center
                .as_ref()
                .ok_or_else(|| ctx.err(span.clone(), "augmented needs `center`"))?;
            let z = ctx.point(span.clone(), "bregman.center", center)?;
            let inner = BregmanSpec { name: base, anchor: spec.anchor.clone(), margin: spec.margin, base: None, center: None };
            build_bregman(ctx, span, &inner, true)?.augmented(z)
        }
    })
}

fn build_bifunction(
    ctx: &Ctx,
    spec: &Spanned<BifunctionSpec>,
    bregman: &BregmanFunction,
    which: &str,
) -> Result<Bifunction, ConfigError> {
    let m = ctx.manifold;
    let span = spec.span();
    let wrap = |e: geoprox::Error| ctx.err(span.clone(), format!("{which}: {e}"));
    let points = |what: &str, v: &[Vec<f64>]| -> Result<Vec<Point>, ConfigError> {
        if v.is_empty() {
            return Err(ctx.err(span.clone(), format!("{which}: {what} must not be empty")));
        }
        v.iter().map(|c| ctx.point(span.clone(), what, c)).collect()
    };
    let matrix = |a: &[Vec<f64>], b: &[f64]| -> Result<(), ConfigError> {
        ctx.vector(span.clone(), "offset", b)?;
        if a.len() != m.dim() {
            return Err(ctx.err(span.clone(), format!("{which}: matrix must have {} rows", m.dim())));
        }
        a.iter().try_for_each(|r| ctx.vector(span.clone(), "matrix row", r))
    };
    Ok(match spec.get_ref() {
        BifunctionSpec::Zero => Bifunction::zero(m),
        BifunctionSpec::Quadratic { center, weights } => {
            ctx.vector(span.clone(), "center", center)?;
            ctx.vector(span.clone(), "weights", weights)?;
            let b = Bifunction::minimization(ScalarField::quadratic(m, center.clone(), weights.clone()).map_err(wrap)?);
            if weights.iter().all(|&w| w >= 0.0) {
                b
            } else {
                b.with_class(MonotonicityClass::Unknown)
            }
        }
        BifunctionSpec::Linear { c } => {
            ctx.vector(span.clone(), "c", c)?;
            Bifunction::minimization(ScalarField::linear(m, c.clone()).map_err(wrap)?)
        }
        BifunctionSpec::SquaredDistance { anchor } => {
            Bifunction::minimization(ScalarField::squared_distance(m, ctx.point(span.clone(), "anchor", anchor)?))
        }
        BifunctionSpec::SumOfDistances { anchors } => {
            Bifunction::minimization(ScalarField::sum_of_distances(m, points("anchors", anchors)?))
        }
        BifunctionSpec::LinearField { matrix: a, offset } => {
            matrix(a, offset)?;
            Bifunction::variational(VectorField::linear(m, a.clone(), offset.clone()).map_err(wrap)?)
        }
        BifunctionSpec::UndermonotoneField { matrix: a, offset, theta } => {
            matrix(a, offset)?;
            let field = VectorField::undermonotone(m, a.clone(), offset.clone(), *theta, bregman).map_err(wrap)?;
            Bifunction::variational(field).with_class(MonotonicityClass::Undermonotone(*theta))
        }
        BifunctionSpec::MedianField { anchors } => {
            Bifunction::variational(VectorField::median(m, points("anchors", anchors)?)).with_class(MonotonicityClass::Monotone)
        }
        BifunctionSpec::ScaledIdentity => Bifunction::variational(VectorField::scaled_identity(m).map_err(wrap)?)
            .with_class(MonotonicityClass::Pseudomonotone),
    })
}

fn build_omega(ctx: &Ctx, spec: &Spanned<OmegaSpec>) -> Result<ConstraintSet, ConfigError> {
    let m = ctx.manifold;
    let span = spec.span();
    let wrap = |e: geoprox::Error| ctx.err(span.clone(), format!("omega: {e}"));
    match spec.get_ref() {
        OmegaSpec::Whole { sample_radius } => ConstraintSet::whole(m, *sample_radius).map_err(wrap),
        OmegaSpec::Box { lower, upper } => {
            ctx.vector(span.clone(), "lower", lower)?;
            ctx.vector(span.clone(), "upper", upper)?;
            ConstraintSet::bounding_box(m, lower.clone(), upper.clone()).map_err(wrap)
        }
        OmegaSpec::Ball { center, radius } => {
            ConstraintSet::ball(m, ctx.point(span.clone(), "center", center)?, *radius).map_err(wrap)
        }
        OmegaSpec::HalfSpace { normal, offset, sample_radius } => {
            ctx.vector(span.clone(), "normal", normal)?;
            ConstraintSet::half_space(m, normal.clone(), *offset, *sample_radius).map_err(wrap)
        }
    }
}

/// Parses and assembles in one step.
pub fn load(src: &str) -> Result<(RunConfig, Assembled), ConfigError> {
    let cfg = RunConfig::parse(src)?;
    let asm = cfg.assemble(src)?;
    Ok((cfg, asm))
}
