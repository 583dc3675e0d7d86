//! The `run` command: solve, audit, write artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use geoprox::bilevel::{
    fejer_audit, limsup_condition_audit, solve_bilevel, step_decay_audit, validate_schedule, AuditOptions, Status,
};
use geoprox::{Point, SolveResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Assembled, ConfigError, RunConfig};
use crate::output::{to_json_pretty, write_trace_csv};

/// Command-line overrides of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

#[derive(Debug)]
pub struct RunOutcome {
    pub name: String,
    pub out_dir: PathBuf,
    pub status: Option<Status>,
    pub success: bool,
    /// Distance to the configured known solution, if any.
    pub solution_error: Option<f64>,
    pub solution_tol: f64,
    pub summary: Value,
    pub elapsed_secs: f64,
}

fn intrinsic(asm: &Assembled, p: &Point) -> Vec<f64> {
    asm.manifold.intrinsic(p).to_vec()
}

/// Starting point: the configured one, else a draw from Ω seeded by the run seed.
pub fn starting_point(asm: &Assembled, seed: u64) -> anyhow::Result<Point> {
    if let Some(x0) = &asm.x0 {
        return Ok(x0.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let p = asm.problem.omega.sample(&mut rng);
        if asm.problem.bregman.zone().contains(&p) && asm.problem.omega.contains(&p) {
            return Ok(p);
        }
    }
    anyhow::bail!("could not sample a starting point inside Ω and the Bregman zone")
}

/// Parses `src`, applies overrides and assembles the solver objects.
pub fn prepare(src: &str, opts: &RunOptions) -> Result<(RunConfig, Assembled), ConfigError> {
    let mut cfg = RunConfig::parse(src)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(n) = opts.max_iters {
        cfg.solver.max_iters = n;
    }
    let asm = cfg.assemble(src)?;
    Ok((cfg, asm))
}

/// Runs a config given as text and writes `trace.csv`, `summary.json` and `audit.json`.
pub fn run_source(src: &str, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let (cfg, asm) = prepare(src, opts)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let start = Instant::now();
    let x0 = starting_point(&asm, cfg.seed)?;
    let solved = solve_bilevel(&asm.problem, &asm.schedule, &x0, &asm.solver, &asm.references);
    let elapsed_secs = start.elapsed().as_secs_f64();

    let mut summary = json!({
        "name": cfg.name,
        "seed": cfg.seed,
        "manifold": format!("{:?}", asm.manifold.kind()).to_lowercase(),
        "dim": asm.manifold.dim(),
        "bregman": asm.problem.bregman.label(),
        "f": asm.problem.f.label(),
        "q": asm.problem.q.label(),
        "omega": asm.problem.omega.description(),
        "strategy": asm.solver.inner.strategy.name(),
        "max_iters": asm.solver.max_iters,
        "x0": intrinsic(&asm, &x0),
    });
    let res = match solved {
        Ok(r) => r,
        Err(e) => {
            summary["status"] = json!("error");
            summary["success"] = json!(false);
            summary["error"] = json!(e.to_string());
            write(&out_dir.join("summary.json"), &to_json_pretty(&summary))?;
            return Ok(RunOutcome {
                name: cfg.name,
                out_dir,
                status: None,
                success: false,
                solution_error: None,
                solution_tol: cfg.problem.solution_tol,
                summary,
                elapsed_secs,
            });
        }
    };

    let solution_error = match &asm.known_solution {
        Some(s) => Some(asm.manifold.dist(&res.x_final, s).map_err(anyhow::Error::from)?),
        None => None,
    };
    fill_summary(&mut summary, &asm, &res, solution_error, cfg.problem.solution_tol);
    write_trace_csv(&out_dir.join("trace.csv"), &asm.manifold, &res.traces, asm.references.len())?;
    write(&out_dir.join("summary.json"), &to_json_pretty(&summary))?;
    let audit = audit_report(&cfg, &asm, &res)?;
    write(&out_dir.join("audit.json"), &to_json_pretty(&audit))?;

    Ok(RunOutcome {
        name: cfg.name,
        out_dir,
        status: Some(res.status),
        success: res.status.is_success(),
        solution_error,
        solution_tol: cfg.problem.solution_tol,
        summary,
        elapsed_secs,
    })
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn fill_summary(summary: &mut Value, asm: &Assembled, res: &SolveResult, err: Option<f64>, tol: f64) {
    let s = summary.as_object_mut().expect("summary is an object");
    s.insert("status".into(), json!(res.status));
    s.insert("success".into(), json!(res.status.is_success()));
    s.insert("iterations".into(), json!(res.iterations));
    s.insert("x_final".into(), json!(intrinsic(asm, &res.x_final)));
    s.insert("x_final_ambient".into(), json!(res.x_final.coords()));
    s.insert("ep_f_gap".into(), json!(res.ep_f_residual.gap));
    s.insert("bilevel_gap".into(), json!(res.bilevel_residual.gap));
    s.insert("inner_nonconverged".into(), json!(res.inner_nonconverged));
    s.insert("max_dist_from_x0".into(), json!(res.max_dist_from_x0));
    s.insert("final_step_dist".into(), json!(res.traces.last().map(|t| t.step_dist)));
    if let Some(ks) = &asm.known_solution {
        s.insert("known_solution".into(), json!(intrinsic(asm, ks)));
        s.insert("solution_error".into(), json!(err));
        s.insert("solution_tol".into(), json!(tol));
        s.insert("within_tolerance".into(), json!(err.is_some_and(|e| e <= tol)));
    }
    if let Some(f) = &res.failure {
        s.insert("failure".into(), json!(f));
    }
}

fn audit_report(cfg: &RunConfig, asm: &Assembled, res: &SolveResult) -> anyhow::Result<Value> {
    let a = &cfg.audit;
    let opts = AuditOptions {
        tail_tol: a.tail_tol,
        tau: asm.solver.tau,
        probes: asm.solver.ep_probes,
        seed: cfg.seed,
        step_tol: a.step_tol,
        bregman_step_tol: a.step_tol,
        limsup_tol: a.limsup_tol,
    };
    let schedule = match validate_schedule(&asm.schedule, a.horizon) {
        Ok(r) => json!(r),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let fejer: Vec<Value> = asm
        .references
        .iter()
        .map(|r| match fejer_audit(&asm.problem, &res.traces, r, &asm.rho, &opts) {
            Ok(rep) => json!(rep),
            Err(e) => json!({ "reference": intrinsic(asm, r), "error": e.to_string() }),
        })
        .collect();
    let limsup = if asm.references.is_empty() {
        Value::Null
    } else {
        match limsup_condition_audit(&asm.problem, &res.traces, &asm.references, &opts) {
            Ok(rep) => json!(rep),
            Err(e) => json!({ "error": e.to_string() }),
        }
    };
    Ok(json!({
        "name": cfg.name,
        "schedule": schedule,
        "fejer": fejer,
        "step_decay": step_decay_audit(&res.traces, &opts),
        "limsup": limsup,
    }))
}
