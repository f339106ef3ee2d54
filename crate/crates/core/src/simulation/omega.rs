use crate::condsurv::ConditionalModel;
use crate::error::{Error, Result};
use crate::explained_variation::{r2_tau, R2Options};
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::zgivent::BaselineHazard;

use super::scenario::{generate, CovariateLaw, Scenario};

pub const DEFAULT_LARGE_SAMPLE: usize = 100_000;

const REL_TOL: f64 = 1e-11;

/// `(E(T | b), E(T² | b))` for hazard `λ₀(t) + b`, `τ = ∞`.
pub fn population_moments(baseline: BaselineHazard, b: f64) -> Result<(f64, f64)> {
    match baseline {
        BaselineHazard::Constant(c) => {
            let r = c + b;
            if !(r > 0.0) {
                return Err(Error::InvalidScenario(format!("non-positive hazard {r}")));
            }
            Ok((1.0 / r, 2.0 / (r * r)))
        }
        BaselineHazard::Linear(a) | BaselineHazard::Root(a) => {
            if b < 0.0 {
                return Err(Error::InvalidScenario(format!(
                    "negative linear predictor {b} with baseline {baseline}"
                )));
            }
            let scale = match baseline {
                BaselineHazard::Linear(_) => 1.0 / (b + a.sqrt()),
                _ => 1.0 / (b + a * a),
            };
            let s = |t: f64| (-baseline.cumulative(t) - b * t).exp();
            let m1 = integrate_to_infinity(s, scale, 0.0, REL_TOL);
            let m2 = integrate_to_infinity(|t| 2.0 * t * s(t), scale, 0.0, REL_TOL);
            Ok((m1.value, m2.value))
        }
    }
}

/// Population `Ω² = Var_Z{E(T|Z)} / Var(T)` for one covariate with `τ = ∞`.
pub fn omega2_analytic(beta: f64, baseline: BaselineHazard, covariate: CovariateLaw) -> Result<f64> {
    let (lo, hi) = covariate.support();
    let worst = (beta * lo).min(beta * hi);
    if let BaselineHazard::Constant(c) = baseline {
        if !(c + worst > 0.0) {
            return Err(Error::InvalidScenario(format!("hazard {c} + {worst} is not positive")));
        }
    } else if beta < 0.0 {
        return Err(Error::InvalidScenario(format!(
            "negative coefficient {beta} with baseline {baseline}"
        )));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    match covariate {
        CovariateLaw::Binary => {
            let (a1, a2) = population_moments(baseline, 0.0)?;
            let (b1, b2) = population_moments(baseline, beta)?;
            let mean = 0.5 * (a1 + b1);
            let explained = 0.25 * (a1 - b1) * (a1 - b1);
            let total = 0.5 * (a2 + b2) - mean * mean;
            Ok(explained / total)
        }
        CovariateLaw::Uniform => {
            let width = hi - lo;
            let mu = |z: f64| population_moments(baseline, beta * z).map(|m| m.0).unwrap_or(f64::NAN);
            let mu2 = |z: f64| population_moments(baseline, beta * z).map(|m| m.1).unwrap_or(f64::NAN);
            let mean = integrate(mu, lo, hi, 0.0, REL_TOL).value / width;
            let second = integrate(mu2, lo, hi, 0.0, REL_TOL).value / width;
            let explained = integrate(|z| (mu(z) - mean).powi(2), lo, hi, 0.0, REL_TOL).value / width;
            let total = second - mean * mean;
            if !(explained.is_finite() && total > 0.0) {
                return Err(Error::InvalidScenario("moment integration failed".into()));
            }
            Ok(explained / total)
        }
    }
}

/// The data-generating model itself: true `β`, true `Λ₀`, curves defined up
/// to a fixed truncation point.
#[derive(Debug, Clone)]
pub struct KnownAdditiveModel {
    pub beta: Vec<f64>,
    pub baseline: BaselineHazard,
    horizon: [f64; 1],
}

impl KnownAdditiveModel {
    pub fn new(beta: Vec<f64>, baseline: BaselineHazard, horizon: f64) -> Self {
        Self {
            beta,
            baseline,
            horizon: [horizon],
        }
    }
}

impl ConditionalModel for KnownAdditiveModel {
    fn dim(&self) -> usize {
        self.beta.len()
    }

    fn max_failure_time(&self) -> f64 {
        self.horizon[0]
    }

    fn failure_times(&self) -> &[f64] {
        &self.horizon
    }

    fn linear_predictor(&self, z: &[f64]) -> f64 {
        self.beta.iter().zip(z).map(|(b, z)| b * z).sum()
    }

    fn baseline_on(&self, grid: &[f64]) -> Result<Vec<f64>> {
        Ok(grid.iter().map(|&t| self.baseline.cumulative(t)).collect())
    }

    fn raw_survival_into(&self, eta: f64, grid: &[f64], baseline: &[f64], out: &mut [f64]) {
        for ((o, &t), &b) in out.iter_mut().zip(grid).zip(baseline) {
            *o = (-b - eta * t).exp();
        }
    }
}

/// `Ω²_τ` approximated on one censored sample of size `size`: the `R²_τ`
/// pipeline with the true model in place of the fit, truncated at the
/// sample's largest failure time.
pub fn omega2_large_sample(scenario: &Scenario, size: usize) -> Result<f64> {
    let mut big = scenario.clone();
    big.n = size;
    let ds = generate(&big)?;
    let t_k = ds.max_failure_time().ok_or(Error::NoFailures)?;
    let model = KnownAdditiveModel::new(scenario.beta.clone(), scenario.baseline, t_k);
    let options = R2Options::default().with_tolerance(1e-3);
    Ok(r2_tau(&model, &ds, &options)?.r2)
}
