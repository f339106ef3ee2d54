//! Explained variation `R²_τ` of the failure time given the covariates.
//!
//! For every subject the truncated conditional curve `Ŝ(t | Zᵢ, T < t_K)` is
//! integrated with the trapezoid rule to give `Ê(T|Zᵢ)` and `Ê(T²|Zᵢ)`.
//! With the mixture marginal, the total variance splits exactly into
//!
//! ```text
//! Var̂(T | T < τ) = E_n{Var̂(T | Z, T < τ)} + Var_n{Ê(T | Z, T < τ)}
//! ```
//!
//! and `R²_τ` is the explained share. Quadrature starts from a grid that
//! contains every failure time and is no coarser than `base_spacing`, then
//! halves every interval until `R²` moves by less than the tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condsurv::{kaplan_meier, profiles, truncated_values_into, ConditionalModel, SurvivalCurve};
use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

pub const DEFAULT_BASE_SPACING: f64 = 0.01;
pub const DEFAULT_TOLERANCE: f64 = 0.01;
pub const DEFAULT_MAX_LEVEL: u32 = 12;

/// Version of the serialized report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Trapezoid grid on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub points: Vec<f64>,
    pub refinement_level: u32,
    pub base_spacing: f64,
}

impl QuadratureGrid {
    /// Level-0 grid: `0`, every knot in `(0, horizon)`, `horizon`, plus
    /// equally spaced fill so that no gap exceeds `base_spacing`.
    pub fn new(knots: &[f64], horizon: f64, base_spacing: f64) -> Result<Self> {
        if !(base_spacing > 0.0 && base_spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {base_spacing}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "truncation point must be positive, got {horizon}"
            )));
        }
        let mut anchors = vec![0.0];
        anchors.extend(knots.iter().copied().filter(|&t| t > 0.0 && t < horizon));
        anchors.push(horizon);
        let mut points = Vec::with_capacity(anchors.len() + (horizon / base_spacing) as usize + 1);
        points.push(0.0);
        for w in anchors.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = ((b - a) / base_spacing).ceil().max(1.0) as usize;
            for j in 1..pieces {
                let t = a + (b - a) * j as f64 / pieces as f64;
                if t > a && t < b {
                    points.push(t);
                }
            }
            points.push(b);
        }
        Ok(Self {
            points,
            refinement_level: 0,
            base_spacing,
        })
    }

    /// Next level: every point of this one plus all interval midpoints.
    pub fn refine(&self) -> Self {
        let mut points = Vec::with_capacity(2 * self.points.len());
        points.push(self.points[0]);
        for w in self.points.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            if mid > w[0] && mid < w[1] {
                points.push(mid);
            }
            points.push(w[1]);
        }
        Self {
            points,
            refinement_level: self.refinement_level + 1,
            base_spacing: self.base_spacing,
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid is never empty")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Which estimate of the marginal law of `T` supplies the total variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    /// Average of the per-subject truncated conditional curves.
    #[default]
    Mixture,
    /// Kaplan–Meier, for sensitivity checks; `R²` may leave `[0, 1]`.
    KaplanMeier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct R2Options {
    pub base_spacing: f64,
    pub tolerance: f64,
    pub max_level: u32,
    pub marginal: Marginal,
    /// Truncation point; defaults to the model's largest failure time.
    pub truncation: Option<f64>,
}

impl Default for R2Options {
    fn default() -> Self {
        Self {
            base_spacing: DEFAULT_BASE_SPACING,
            tolerance: DEFAULT_TOLERANCE,
            max_level: DEFAULT_MAX_LEVEL,
            marginal: Marginal::Mixture,
            truncation: None,
        }
    }
}

impl R2Options {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Spacing `max(0.01, t_K / 10⁵)`, bounding the grid size on long time scales.
    pub fn with_capped_spacing(mut self, t_k: f64) -> Self {
        self.base_spacing = DEFAULT_BASE_SPACING.max(t_k / 1e5);
        self
    }
}

/// `(total, residual, explained)` variance on one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub total: f64,
    pub residual: f64,
    pub explained: f64,
}

impl VarianceComponents {
    pub fn r2(&self) -> f64 {
        if self.total > 0.0 {
            self.explained / self.total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub level: u32,
    pub grid_points: usize,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedVariationReport {
    pub total_variance: f64,
    pub residual_variance: f64,
    pub explained_variance: f64,
    pub r2: f64,
    pub r2_adjusted: Option<f64>,
    pub refinement_trace: Vec<RefinementStep>,
    pub converged: bool,
    pub truncation_time: f64,
    pub base_spacing: f64,
    pub tolerance: f64,
    pub marginal: Marginal,
    pub n: usize,
    pub p: usize,
    pub warnings: Vec<String>,
}

/// `(∫ S dt, 2 ∫ t S dt)` by the trapezoid rule.
pub(crate) fn trapezoid_moments(grid: &[f64], values: &[f64]) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (t, s) in grid.windows(2).zip(values.windows(2)) {
        let h = t[1] - t[0];
        m1 += 0.5 * h * (s[0] + s[1]);
        m2 += h * (t[0] * s[0] + t[1] * s[1]);
    }
    (m1, m2)
}

/// `(Ê(T|z, T<τ), Ê(T²|z, T<τ))` from a truncated curve (value 0 at its end).
pub fn conditional_moments(curve: &SurvivalCurve) -> Result<(f64, f64)> {
    let end = curve.last_value();
    if end.abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("curve is not truncated: ends at {end}")));
    }
    Ok(trapezoid_moments(&curve.times, &curve.values))
}

/// Per-profile moments on one grid: `(weight, m1, m2)` in profile order.
fn profile_moments<M: ConditionalModel + ?Sized>(
    model: &M,
    groups: &[(f64, usize, usize)],
    grid: &[f64],
) -> Result<Vec<(usize, f64, f64)>> {
    let baseline = model.baseline_on(grid)?;
    groups
        .par_iter()
        .map_init(
            || vec![0.0; grid.len()],
            |buf, &(eta, count, first)| {
                truncated_values_into(model, eta, grid, &baseline, first, buf)?;
                let (m1, m2) = trapezoid_moments(grid, buf);
                Ok((count, m1, m2))
            },
        )
        .collect()
}

fn components_from(moments: &[(usize, f64, f64)], n: usize) -> VarianceComponents {
    let n = n as f64;
    let mut mean1 = 0.0;
    let mut residual = 0.0;
    for &(count, m1, m2) in moments {
        let w = count as f64 / n;
        mean1 += w * m1;
        residual += w * (m2 - m1 * m1);
    }
    let explained: f64 = moments
        .iter()
        .map(|&(count, m1, _)| count as f64 / n * (m1 - mean1) * (m1 - mean1))
        .sum();
    VarianceComponents {
        total: residual + explained,
        residual,
        explained,
    }
}

fn truncation_point<M: ConditionalModel + ?Sized>(model: &M, truncation: Option<f64>) -> Result<f64> {
    let t_k = model.max_failure_time();
    match truncation {
        None => Ok(t_k),
        Some(t) if t > 0.0 && t <= t_k => Ok(t),
        Some(t) => Err(Error::OutOfDomain { time: t, max: t_k }),
    }
}

/// Level-0 grid for `model` on `[0, truncation]`.
pub fn base_grid<M: ConditionalModel + ?Sized>(model: &M, options: &R2Options) -> Result<QuadratureGrid> {
    let horizon = truncation_point(model, options.truncation)?;
    QuadratureGrid::new(model.failure_times(), horizon, options.base_spacing)
}

/// Residual and explained variance over the covariate sample `ds` on one grid.
pub fn variance_components<M: ConditionalModel + ?Sized>(
    model: &M,
    ds: &SurvivalDataset,
    grid: &QuadratureGrid,
) -> Result<VarianceComponents> {
    let groups = profiles(model, ds)?;
    let moments = profile_moments(model, &groups, &grid.points)?;
    Ok(components_from(&moments, ds.len()))
}

/// `Var̂(T | T < τ)` from integrating the mixture marginal curve directly.
pub fn mixture_marginal_variance<M: ConditionalModel + ?Sized>(
    model: &M,
    ds: &SurvivalDataset,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let curve = crate::condsurv::marginal_mixture(model, ds, &grid.points)?;
    let (m1, m2) = conditional_moments(&curve)?;
    Ok(m2 - m1 * m1)
}

/// Total variance from the Kaplan–Meier curve of `ds` truncated at the grid end.
fn km_total_variance(ds: &SurvivalDataset, grid: &QuadratureGrid) -> Result<f64> {
    let km = kaplan_meier(ds)?;
    let horizon = grid.horizon();
    let mut values = Vec::with_capacity(grid.len());
    let last_km = *km.times.last().expect("non-empty");
    for &t in &grid.points {
        values.push(km.eval(t.min(last_km))?);
    }
    crate::condsurv::truncate_in_place(&mut values, 0).map_err(|_| Error::NoEventMass {
        subject: usize::MAX,
        survival: km.eval(horizon.min(last_km)).unwrap_or(1.0),
    })?;
    let (m1, m2) = trapezoid_moments(&grid.points, &values);
    Ok(m2 - m1 * m1)
}

fn components_at<M: ConditionalModel + ?Sized>(
    model: &M,
    ds: &SurvivalDataset,
    groups: &[(f64, usize, usize)],
    grid: &QuadratureGrid,
    marginal: Marginal,
) -> Result<VarianceComponents> {
    let moments = profile_moments(model, groups, &grid.points)?;
    let mut c = components_from(&moments, ds.len());
    if marginal == Marginal::KaplanMeier {
        c.total = km_total_variance(ds, grid)?;
    }
    Ok(c)
}

/// `R²_τ` for the covariate sample `ds` under `model`, with grid halving
/// until successive values differ by less than `options.tolerance`.
pub fn r2_tau<M: ConditionalModel + ?Sized>(
    model: &M,
    ds: &SurvivalDataset,
    options: &R2Options,
) -> Result<ExplainedVariationReport> {
    let groups = profiles(model, ds)?;
    let mut grid = base_grid(model, options)?;
    let mut comps = components_at(model, ds, &groups, &grid, options.marginal)?;
    let mut trace = vec![RefinementStep {
        level: 0,
        grid_points: grid.len(),
        r2: comps.r2(),
    }];
    let mut converged = false;
    while grid.refinement_level < options.max_level {
        grid = grid.refine();
        let next = components_at(model, ds, &groups, &grid, options.marginal)?;
        let change = (next.r2() - comps.r2()).abs();
        comps = next;
        trace.push(RefinementStep {
            level: grid.refinement_level,
            grid_points: grid.len(),
            r2: comps.r2(),
        });
        if change < options.tolerance {
            converged = true;
            break;
        }
    }
    let r2 = comps.r2();
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "grid halving did not reach tolerance {} by level {}",
            options.tolerance, options.max_level
        ));
    }
    if options.marginal == Marginal::KaplanMeier && !(0.0..=1.0).contains(&r2) {
        warnings.push(format!("Kaplan-Meier marginal gives R² = {r2} outside [0, 1]"));
    }
    Ok(ExplainedVariationReport {
        total_variance: comps.total,
        residual_variance: comps.residual,
        explained_variance: comps.explained,
        r2,
        r2_adjusted: adjusted_r2(r2, ds.len(), ds.dim()).ok(),
        refinement_trace: trace,
        converged,
        truncation_time: grid.horizon(),
        base_spacing: options.base_spacing,
        tolerance: options.tolerance,
        marginal: options.marginal,
        n: ds.len(),
        p: ds.dim(),
        warnings,
    })
}

/// `R²_adj = 1 − (1 − R²)(n − 1)/(n − p − 1)`.
pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> Result<f64> {
    if n <= p + 1 {
        return Err(Error::InvalidArgument(format!(
            "adjusted R² needs n > p + 1 (n={n}, p={p})"
        )));
    }
    Ok(1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0))
}

/// `R²_out`: curves from a training fit evaluated at the test covariates,
/// truncated at the training `t_K`. Test events past that point are flagged
/// in the report warnings.
pub fn out_of_sample_r2<M: ConditionalModel + ?Sized>(
    fit_train: &M,
    test: &SurvivalDataset,
    options: &R2Options,
) -> Result<ExplainedVariationReport> {
    if test.dim() != fit_train.dim() {
        return Err(Error::DimensionMismatch {
            expected: fit_train.dim(),
            found: test.dim(),
        });
    }
    let mut report = r2_tau(fit_train, test, options)?;
    let t_k = fit_train.max_failure_time();
    let beyond = test
        .times()
        .iter()
        .zip(test.events())
        .filter(|(&t, &e)| e && t > t_k)
        .count();
    if beyond > 0 {
        report
            .warnings
            .push(format!("{beyond} test events occur after the training t_K = {t_k}"));
    }
    Ok(report)
}
