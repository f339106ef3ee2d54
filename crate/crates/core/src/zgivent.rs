//! Conditional law of a scalar covariate given the failure time, and the
//! residual-based explained variation `R²_{Z|T}`.
//!
//! Under the additive model with known baseline hazard `λ₀`, the law of `Z`
//! at failure time `t` puts weight `Y_j(t){λ₀(t) + β̂ Z_j}` on each subject
//! still at risk. Negative weights (possible when `β̂ < 0`) are clamped to
//! zero and counted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

/// Known baseline hazard `λ₀(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "scale", rename_all = "snake_case")]
pub enum BaselineHazard {
    /// `λ₀(t) = c`.
    Constant(f64),
    /// `λ₀(t) = a·t`.
    Linear(f64),
    /// `λ₀(t) = a / (2√t)`.
    Root(f64),
}

impl BaselineHazard {
    pub fn hazard(&self, t: f64) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::Linear(a) => a * t,
            Self::Root(a) => a / (2.0 * t.sqrt()),
        }
    }

    /// `Λ₀(t) = ∫₀ᵗ λ₀`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match *self {
            Self::Constant(c) => c * t,
            Self::Linear(a) => 0.5 * a * t * t,
            Self::Root(a) => a * t.sqrt(),
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Self::Constant(s) | Self::Linear(s) | Self::Root(s) => s,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant(_) => "const",
            Self::Linear(_) => "linear",
            Self::Root(_) => "root",
        }
    }
}

impl fmt::Display for BaselineHazard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name(), self.scale())
    }
}

impl FromStr for BaselineHazard {
    type Err = Error;

    /// Parses `const:1.0`, `linear:1.0` or `root:1.0` (scale optional).
    fn from_str(s: &str) -> Result<Self> {
        let (family, scale) = match s.split_once(':') {
            Some((f, v)) => (f, v),
            None => (s, "1"),
        };
        let scale: f64 = scale
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad baseline scale in '{s}'")))?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "baseline scale must be positive in '{s}'"
            )));
        }
        match family.trim() {
            "const" | "constant" => Ok(Self::Constant(scale)),
            "linear" => Ok(Self::Linear(scale)),
            "root" | "sqrt" => Ok(Self::Root(scale)),
            other => Err(Error::InvalidArgument(format!(
                "unknown baseline family '{other}' (expected const, linear or root)"
            ))),
        }
    }
}

fn scalar_covariates(ds: &SurvivalDataset) -> Result<&[f64]> {
    if ds.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: ds.dim(),
        });
    }
    Ok(ds.covariates_flat())
}

fn weight(lam: f64, beta: f64, z: f64) -> (f64, bool) {
    let w = lam + beta * z;
    if w < 0.0 {
        (0.0, true)
    } else {
        (w, false)
    }
}

/// `P̂(Z ≤ z | T = t)`.
pub fn z_given_t_cdf(ds: &SurvivalDataset, beta: f64, lam0: BaselineHazard, t: f64, z: f64) -> Result<f64> {
    let zs = scalar_covariates(ds)?;
    let lam = lam0.hazard(t);
    let mut below = 0.0;
    let mut total = 0.0;
    let mut any = false;
    for (&x, &zj) in ds.times().iter().zip(zs) {
        if x >= t {
            any = true;
            let (w, _) = weight(lam, beta, zj);
            total += w;
            if zj <= z {
                below += w;
            }
        }
    }
    if !any {
        return Err(Error::EmptyRiskSet { time: t });
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateConditionalLaw { time: t });
    }
    Ok(below / total)
}

/// `Ê_β(Z | t)`, the weighted at-risk mean of `Z`.
pub fn expected_z_given_t(ds: &SurvivalDataset, beta: f64, lam0: BaselineHazard, t: f64) -> Result<f64> {
    let zs = scalar_covariates(ds)?;
    let lam = lam0.hazard(t);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0usize;
    let mut sum = 0.0;
    for (&x, &zj) in ds.times().iter().zip(zs) {
        if x >= t {
            count += 1;
            sum += zj;
            let (w, _) = weight(lam, beta, zj);
            num += w * zj;
            den += w;
        }
    }
    if count == 0 {
        return Err(Error::EmptyRiskSet { time: t });
    }
    if beta == 0.0 {
        if !(lam > 0.0) {
            return Err(Error::DegenerateConditionalLaw { time: t });
        }
        return Ok(sum / count as f64);
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateConditionalLaw { time: t });
    }
    Ok(num / den)
}

/// Running sums over the risk set `{X ≥ t}` built from the latest time down.
struct RiskSums {
    count: usize,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

impl RiskSums {
    fn weighted_mean(&self, lam: f64, beta: f64, t: f64, risk_set: &[f64], clamped: &mut usize) -> Result<f64> {
        if beta == 0.0 {
            if !(lam > 0.0) {
                return Err(Error::DegenerateConditionalLaw { time: t });
            }
            return Ok(self.sum / self.count as f64);
        }
        let worst = if beta > 0.0 { self.min } else { self.max };
        let (num, den) = if lam + beta * worst >= 0.0 {
            (
                lam * self.sum + beta * self.sum_sq,
                lam * self.count as f64 + beta * self.sum,
            )
        } else {
            let mut num = 0.0;
            let mut den = 0.0;
            for &z in risk_set {
                let (w, c) = weight(lam, beta, z);
                *clamped += usize::from(c);
                num += w * z;
                den += w;
            }
            (num, den)
        };
        if !(den > 0.0) {
            return Err(Error::DegenerateConditionalLaw { time: t });
        }
        Ok(num / den)
    }
}

/// `R²_{Z|T} = 1 − Σ rᵢ(β̂)² / Σ rᵢ(0)²` over subjects with an observed event,
/// where `rᵢ(β) = Zᵢ − Ê_β(Z | Xᵢ)`.
pub fn r2_z_given_t(ds: &SurvivalDataset, beta_hat: f64, lam0: BaselineHazard) -> Result<f64> {
    let zs = scalar_covariates(ds)?;
    if ds.event_count() == 0 {
        return Err(Error::NoFailures);
    }
    let order = ds.sorted_order();
    let times = ds.times();
    let events = ds.events();
    let sorted_z: Vec<f64> = order.iter().map(|&i| zs[i]).collect();

    let mut sums = RiskSums {
        count: 0,
        sum: 0.0,
        sum_sq: 0.0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    let mut ss_fit = 0.0;
    let mut ss_null = 0.0;
    let mut clamped = 0usize;
    let mut end = order.len();
    while end > 0 {
        let t = times[order[end - 1]];
        let mut start = end - 1;
        while start > 0 && times[order[start - 1]] == t {
            start -= 1;
        }
        for &z in &sorted_z[start..end] {
            sums.count += 1;
            sums.sum += z;
            sums.sum_sq += z * z;
            sums.min = sums.min.min(z);
            sums.max = sums.max.max(z);
        }
        if order[start..end].iter().any(|&i| events[i]) {
            let lam = lam0.hazard(t);
            let risk_set = &sorted_z[start..];
            let e_fit = sums.weighted_mean(lam, beta_hat, t, risk_set, &mut clamped)?;
            let e_null = sums.sum / sums.count as f64;
            for &i in order[start..end].iter().filter(|&&i| events[i]) {
                ss_fit += (zs[i] - e_fit).powi(2);
                ss_null += (zs[i] - e_null).powi(2);
            }
        }
        end = start;
    }
    if clamped > 0 {
        log::warn!("clamped {clamped} negative conditional weights to zero");
    }
    if !(ss_null > 0.0) {
        return Err(Error::NoCovariateDispersion);
    }
    Ok(1.0 - ss_fit / ss_null)
}
