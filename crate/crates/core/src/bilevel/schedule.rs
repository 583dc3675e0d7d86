//! Step-size schedules `μ_k`, `λ_k` and their validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real sequence indexed by the outer iteration `k >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sequence {
    Constant { value: f64 },
    /// `c0 (k + 1)^{-p}`
    Power { c0: f64, p: f64 },
    /// `c0 rate^k`
    Geometric { c0: f64, rate: f64 },
    /// Repeats `values` cyclically.
    Cyclic { values: Vec<f64> },
}

impl Sequence {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            Sequence::Constant { value } => *value,
            Sequence::Power { c0, p } => c0 * ((k + 1) as f64).powf(-p),
            Sequence::Geometric { c0, rate } => c0 * rate.powi(k.min(i32::MAX as usize) as i32),
            Sequence::Cyclic { values } => values.get(k % values.len().max(1)).copied().unwrap_or(f64::NAN),
        }
    }
}

/// The pair of sequences driving the outer loop, with the declared `θ` of `F` and `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mu: Sequence,
    pub lambda: Sequence,
    pub theta: f64,
}

impl Schedule {
    /// `μ_k = μ0 (k+1)^{-p}`, `λ_k ≡ λ0`.
    pub fn standard(mu0: f64, p: f64, lambda0: f64, theta: f64) -> Self {
        Self {
            mu: Sequence::Power { c0: mu0, p },
            lambda: Sequence::Constant { value: lambda0 },
            theta,
        }
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu.value(k)
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.lambda.value(k)
    }

    /// Hard requirements checked before iteration 0: positivity, finiteness and
    /// `λ_k > θ` for every `k < horizon`.
    pub fn check_admissible(&self, horizon: usize) -> Result<()> {
        if !(self.theta >= 0.0) {
            return Err(Error::Configuration(format!("theta must be nonnegative, got {}", self.theta)));
        }
        for k in 0..horizon.max(1) {
            let (mu, lambda) = (self.mu(k), self.lambda(k));
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::Configuration(format!("mu_{k} = {mu} is not a positive real")));
            }
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::Configuration(format!("lambda_{k} = {lambda} is not a positive real")));
            }
            if !(lambda > self.theta) {
                return Err(Error::Configuration(format!(
                    "schedule violates theta < lambda_k: lambda_{k} = {lambda} <= theta = {}",
                    self.theta
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleReport {
    pub horizon: usize,
    pub positive: bool,
    pub bounded: bool,
    pub lambda_above_theta: bool,
    pub summable: bool,
    pub partial_sum: f64,
    /// `Σ_{H/10 <= k < H} μ_k/λ_k` relative to the full partial sum.
    pub last_decade_fraction: f64,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Relative increment over the last decade below which partial sums count as stabilized.
pub const STABILIZATION_TOL: f64 = 1e-6;

/// Checks positivity, boundedness, `λ_k > θ` and partial-sum stabilization of
/// `Σ μ_k/λ_k` over `horizon` terms.
pub fn validate_schedule(sched: &Schedule, horizon: usize) -> Result<ScheduleReport> {
    if horizon < 100 {
        return Err(Error::Parameter(format!("horizon must be at least 100, got {horizon}")));
    }
    let decade = horizon / 10;
    let mut failures = Vec::new();
    let (mut positive, mut above) = (true, true);
    let (mut head_max, mut tail_max) = (0.0f64, 0.0f64);
    let (mut total, mut last_decade) = (0.0f64, 0.0f64);
    for k in 0..horizon {
        let (mu, lambda) = (sched.mu(k), sched.lambda(k));
        if positive && !(mu > 0.0 && lambda > 0.0) {
            positive = false;
            failures.push(format!("nonpositive term at k = {k}: mu = {mu}, lambda = {lambda}"));
        }
        if above && !(lambda > sched.theta) {
            above = false;
            failures.push(format!(
                "theta < lambda_k fails at k = {k}: lambda = {lambda}, theta = {}",
                sched.theta
            ));
        }
        let size = mu.abs().max(lambda.abs());
        if k < decade {
            head_max = head_max.max(size);
        } else {
            tail_max = tail_max.max(size);
        }
        let ratio = mu / lambda;
        total += ratio;
        if k >= decade {
            last_decade += ratio;
        }
    }
    // a bounded sequence cannot keep growing past its first decade
    let bounded = head_max.is_finite() && tail_max.is_finite() && tail_max <= 2.0 * head_max.max(f64::MIN_POSITIVE);
    if !bounded {
        failures.push(format!("sequences grow: max over first tenth {head_max:e}, remainder {tail_max:e}"));
    }
    let fraction = if total > 0.0 { last_decade / total } else { f64::INFINITY };
    let summable = total.is_finite() && fraction < STABILIZATION_TOL;
    if !summable {
        failures.push(format!(
            "sum of mu_k/lambda_k not stabilized: last {} of {horizon} terms add {fraction:.3e} of the partial sum {total:.6e}",
            horizon - decade
        ));
    }
    Ok(ScheduleReport {
        horizon,
        positive,
        bounded,
        lambda_above_theta: above,
        summable,
        partial_sum: total,
        last_decade_fraction: fraction,
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_values() {
        assert_eq!(Sequence::Power { c0: 2.0, p: 2.0 }.value(1), 0.5);
        assert_eq!(Sequence::Geometric { c0: 1.0, rate: 0.5 }.value(3), 0.125);
        let c = Sequence::Cyclic { values: vec![1.0, 10.0] };
        assert_eq!((c.value(0), c.value(1), c.value(2)), (1.0, 10.0, 1.0));
    }

    #[test]
    fn lambda_equal_theta_is_rejected_up_front() {
        let s = Schedule::standard(1.0, 2.0, 0.5, 0.5);
        let err = s.check_admissible(10).unwrap_err().to_string();
        assert!(err.contains("theta < lambda_k"), "{err}");
        assert!(Schedule::standard(1.0, 2.0, 0.6, 0.5).check_admissible(10).is_ok());
        let rep = validate_schedule(&s, 1000).unwrap();
        assert!(!rep.lambda_above_theta && !rep.passed);
    }

    #[test]
    fn harmonic_schedule_fails_summability() {
        let rep = validate_schedule(&Schedule::standard(1.0, 1.0, 1.0, 0.0), 100_000).unwrap();
        assert!(!rep.summable && rep.positive && rep.bounded);
        assert!(rep.last_decade_fraction > 0.1);
    }

    #[test]
    fn geometric_schedule_stabilizes_quickly() {
        let s = Schedule {
            mu: Sequence::Geometric { c0: 1.0, rate: 0.5 },
            lambda: Sequence::Constant { value: 1.0 },
            theta: 0.0,
        };
        let rep = validate_schedule(&s, 1000).unwrap();
        assert!(rep.passed, "{:?}", rep.failures);
        assert!((rep.partial_sum - 2.0).abs() < 1e-12);
    }

    #[test]
    fn growing_lambda_is_unbounded() {
        let s = Schedule {
            mu: Sequence::Power { c0: 1.0, p: 2.0 },
            lambda: Sequence::Power { c0: 1.0, p: -1.0 },
            theta: 0.0,
        };
        assert!(!validate_schedule(&s, 1000).unwrap().bounded);
    }

    #[test]
    fn short_horizon_is_a_parameter_error() {
        assert!(validate_schedule(&Schedule::standard(1.0, 2.0, 1.0, 0.0), 99).is_err());
    }
}
