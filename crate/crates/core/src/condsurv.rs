//! Conditional, truncated-conditional, mixture-marginal and Kaplan–Meier
//! survival curves, all represented by values on an explicit time grid.

use rayon::prelude::*;

use crate::dataset::{failure_grid, SurvivalDataset};
use crate::error::{Error, Result};
use crate::linying::AdditiveFit;

/// Curves with `1 − S(t_K|z)` below this carry no usable event mass.
pub const EVENT_MASS_EPSILON: f64 = 1e-8;

/// A model that yields `S̃(t|z)` through a scalar linear predictor.
///
/// The curve for covariate `z` depends on `z` only through
/// `η = linear_predictor(z)`, and on `t` through a shared baseline term that
/// is evaluated once per grid.
pub trait ConditionalModel: Sync {
    /// Covariate dimension.
    fn dim(&self) -> usize;
    /// Largest observed failure time `t_K`; curves are defined on `[0, t_K]`.
    fn max_failure_time(&self) -> f64;
    /// Failure times that the quadrature grid must contain.
    fn failure_times(&self) -> &[f64];
    fn linear_predictor(&self, z: &[f64]) -> f64;
    /// Baseline component evaluated on a non-decreasing grid in `[0, t_K]`.
    fn baseline_on(&self, grid: &[f64]) -> Result<Vec<f64>>;
    /// Raw (possibly non-monotone) survival for predictor `eta`.
    fn raw_survival_into(&self, eta: f64, grid: &[f64], baseline: &[f64], out: &mut [f64]);
}

impl ConditionalModel for AdditiveFit {
    fn dim(&self) -> usize {
        self.p
    }

    fn max_failure_time(&self) -> f64 {
        self.grid.last_time()
    }

    fn failure_times(&self) -> &[f64] {
        &self.grid.times
    }

    fn linear_predictor(&self, z: &[f64]) -> f64 {
        AdditiveFit::linear_predictor(self, z)
    }

    fn baseline_on(&self, grid: &[f64]) -> Result<Vec<f64>> {
        self.baseline.eval_sorted(grid)
    }

    /// `S̃(t|z) = exp(−Λ̃₀(t) − β̂ᵀz·t)`.
    fn raw_survival_into(&self, eta: f64, grid: &[f64], baseline: &[f64], out: &mut [f64]) {
        for ((o, &t), &b) in out.iter_mut().zip(grid).zip(baseline) {
            *o = (-b - eta * t).exp();
        }
    }
}

/// How a curve is read between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    /// Right-continuous step function.
    Step,
}

/// Non-increasing survival function sampled on a grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub label: String,
    pub interpolation: Interpolation,
}

impl SurvivalCurve {
    pub fn eval(&self, t: f64) -> Result<f64> {
        let last = *self.times.last().expect("curves are never empty");
        if !(0.0..=last).contains(&t) {
            return Err(Error::OutOfDomain { time: t, max: last });
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        if k + 1 == self.times.len() || self.interpolation == Interpolation::Step {
            return Ok(self.values[k]);
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.values[k] + w * (self.values[k + 1] - self.values[k]))
    }

    /// Value at the last grid point.
    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("curves are never empty")
    }
}

/// `S̃(t|z)` on `grid`; may exceed 1 or increase.
pub fn raw_conditional<M: ConditionalModel + ?Sized>(model: &M, z: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if z.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: z.len(),
        });
    }
    let baseline = model.baseline_on(grid)?;
    let mut out = vec![0.0; grid.len()];
    model.raw_survival_into(model.linear_predictor(z), grid, &baseline, &mut out);
    Ok(out)
}

/// Running minimum started at 1, in place.
pub(crate) fn monotone_in_place(values: &mut [f64]) {
    let mut running = 1.0_f64;
    for v in values {
        running = running.min(*v);
        *v = running;
    }
}

/// `Ŝ(t|z) = min(1, min_{s ≤ t} S̃(s|z))`.
pub fn adjust_monotone(grid: &[f64], raw: &[f64]) -> SurvivalCurve {
    let mut values = raw.to_vec();
    monotone_in_place(&mut values);
    SurvivalCurve {
        times: grid.to_vec(),
        values,
        label: "conditional".into(),
        interpolation: Interpolation::Linear,
    }
}

/// Renormalises in place to `(S − S_K) / (1 − S_K)` where `S_K` is the last
/// value; returns `S_K`.
pub(crate) fn truncate_in_place(values: &mut [f64], subject: usize) -> Result<f64> {
    let s_k = *values.last().expect("non-empty grid");
    if !(s_k < 1.0 - EVENT_MASS_EPSILON) {
        return Err(Error::NoEventMass { subject, survival: s_k });
    }
    let denom = 1.0 - s_k;
    for v in values.iter_mut() {
        *v = (*v - s_k) / denom;
    }
    *values.last_mut().expect("non-empty grid") = 0.0;
    Ok(s_k)
}

/// `Ŝ(t|z, T < t_K)`, i.e. the curve conditioned on failing before `t_K`,
/// restricted to `[0, t_K]`.
pub fn truncate_conditional(curve: &SurvivalCurve, t_k: f64) -> Result<SurvivalCurve> {
    let s_k = curve.eval(t_k)?;
    let cut = curve.times.partition_point(|&x| x < t_k);
    let mut times = curve.times[..cut].to_vec();
    let mut values = curve.values[..cut].to_vec();
    times.push(t_k);
    values.push(s_k);
    truncate_in_place(&mut values, 0)?;
    Ok(SurvivalCurve {
        times,
        values,
        label: format!("{} | T < {t_k}", curve.label),
        interpolation: curve.interpolation,
    })
}

/// Covariate profiles sharing a linear predictor: `(η, count, first subject)`.
pub(crate) fn profiles<M: ConditionalModel + ?Sized>(
    model: &M,
    ds: &SurvivalDataset,
) -> Result<Vec<(f64, usize, usize)>> {
    if ds.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: ds.dim(),
        });
    }
    let mut index: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..ds.len() {
        // `+ 0.0` folds −0 into +0 so a zero predictor forms a single profile.
        let eta = model.linear_predictor(ds.z(i)) + 0.0;
        match index.entry(eta.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => out[*e.get()].1 += 1,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(out.len());
                out.push((eta, 1, i));
            }
        }
    }
    Ok(out)
}

/// Truncated-conditional curve values for predictor `eta` on `grid`
/// (ending at the truncation point), written into `out`.
pub(crate) fn truncated_values_into<M: ConditionalModel + ?Sized>(
    model: &M,
    eta: f64,
    grid: &[f64],
    baseline: &[f64],
    subject: usize,
    out: &mut [f64],
) -> Result<()> {
    model.raw_survival_into(eta, grid, baseline, out);
    monotone_in_place(out);
    truncate_in_place(out, subject)?;
    Ok(())
}

/// `Ŝ(t | T < t_K) = n⁻¹ Σᵢ Ŝ(t | Zᵢ, T < t_K)` on `grid`, where `grid` ends
/// at the truncation point.
pub fn marginal_mixture<M: ConditionalModel + ?Sized>(
    model: &M,
    ds: &SurvivalDataset,
    grid: &[f64],
) -> Result<SurvivalCurve> {
    let groups = profiles(model, ds)?;
    let baseline = model.baseline_on(grid)?;
    let n = ds.len() as f64;
    let curves: Vec<(f64, Vec<f64>)> = groups
        .par_iter()
        .map(|&(eta, count, first)| {
            let mut v = vec![0.0; grid.len()];
            truncated_values_into(model, eta, grid, &baseline, first, &mut v)?;
            Ok((count as f64 / n, v))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; grid.len()];
    for (w, v) in &curves {
        for (acc, x) in values.iter_mut().zip(v) {
            *acc += w * x;
        }
    }
    Ok(SurvivalCurve {
        times: grid.to_vec(),
        values,
        label: "mixture marginal".into(),
        interpolation: Interpolation::Linear,
    })
}

/// Product-limit estimate on `0, t_1, …, t_K` (right-continuous steps).
pub fn kaplan_meier(ds: &SurvivalDataset) -> Result<SurvivalCurve> {
    let grid = failure_grid(ds)?;
    let mut times = vec![0.0];
    let mut values = vec![1.0];
    let mut s = 1.0;
    for ((&t, &d), &r) in grid.times.iter().zip(&grid.event_counts).zip(&grid.risk_counts) {
        s *= 1.0 - d as f64 / r as f64;
        if t == 0.0 {
            values[0] = s;
        } else {
            times.push(t);
            values.push(s);
        }
    }
    Ok(SurvivalCurve {
        times,
        values,
        label: "kaplan-meier".into(),
        interpolation: Interpolation::Step,
    })
}
