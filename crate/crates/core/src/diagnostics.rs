//! Between-group difference of Nelson–Aalen cumulative hazards. Under the
//! additive model the difference is linear in time with slope equal to the
//! group coefficient.

use serde::Serialize;

use crate::dataset::{distinct_values, SurvivalDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumHazDifference {
    /// Merged event times of both groups up to the end of the shorter follow-up.
    pub times: Vec<f64>,
    pub group0: Vec<f64>,
    pub group1: Vec<f64>,
    /// `Λ̂₁(t) − Λ̂₀(t)`.
    pub difference: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination of the least-squares line.
    pub line_r2: f64,
}

/// Nelson–Aalen increments `(t, d/r)` for the subjects in `members`.
fn nelson_aalen(ds: &SurvivalDataset, members: &[usize], min_at_risk: usize) -> Vec<(f64, f64)> {
    let mut idx = members.to_vec();
    idx.sort_by(|&a, &b| ds.times()[a].total_cmp(&ds.times()[b]));
    let mut out = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let t = ds.times()[idx[start]];
        let mut end = start;
        while end < idx.len() && ds.times()[idx[end]] == t {
            end += 1;
        }
        let at_risk = idx.len() - start;
        let deaths = idx[start..end].iter().filter(|&&i| ds.events()[i]).count();
        if deaths > 0 && at_risk >= min_at_risk {
            out.push((t, deaths as f64 / at_risk as f64));
        }
        start = end;
    }
    out
}

/// Step-held cumulative sums of `increments` at each of `times`.
fn hold(increments: &[(f64, f64)], times: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut k = 0;
    times
        .iter()
        .map(|&t| {
            while k < increments.len() && increments[k].0 <= t {
                acc += increments[k].1;
                k += 1;
            }
            acc
        })
        .collect()
}

/// `Λ̂₁ − Λ̂₀` for the binary covariate in `column`, on the merged event
/// grid restricted to times both groups are followed, using only risk sets
/// with at least `min_at_risk` subjects (1 keeps every event time).
pub fn cumhaz_difference(ds: &SurvivalDataset, column: usize, min_at_risk: usize) -> Result<CumHazDifference> {
    if column >= ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: column + 1,
        });
    }
    let values = distinct_values(ds, column);
    if !values.iter().all(|&b| b == 0f64.to_bits() || b == 1f64.to_bits()) {
        return Err(Error::NonBinaryGroup { column });
    }
    let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for i in 0..ds.len() {
        groups[usize::from(ds.z(i)[column] == 1.0)].push(i);
    }
    let min_at_risk = min_at_risk.max(1);
    let na: Vec<Vec<(f64, f64)>> = groups.iter().map(|g| nelson_aalen(ds, g, min_at_risk)).collect();
    for (g, inc) in na.iter().enumerate() {
        if inc.is_empty() {
            return Err(Error::GroupWithoutEvents { group: g as u8 });
        }
    }
    let horizon = groups
        .iter()
        .map(|g| g.iter().map(|&i| ds.times()[i]).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    let mut times: Vec<f64> = na.iter().flatten().map(|&(t, _)| t).filter(|&t| t <= horizon).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let group0 = hold(&na[0], &times);
    let group1 = hold(&na[1], &times);
    let difference: Vec<f64> = group1.iter().zip(&group0).map(|(a, b)| a - b).collect();
    let (slope, intercept, line_r2) = least_squares(&times, &difference);
    Ok(CumHazDifference {
        times,
        group0,
        group1,
        difference,
        slope,
        intercept,
        line_r2,
    })
}

/// `(slope, intercept, R²)`; a constant response gives `R² = 1`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (slope, intercept, r2)
}
