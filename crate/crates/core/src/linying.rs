//! Semiparametric additive hazards regression, `λ(t|Z) = λ₀(t) + βᵀZ`.
//!
//! The regression coefficient is the closed-form Lin–Ying estimator
//!
//! ```text
//! β̂ = [Σᵢ ∫ Yᵢ(t){Zᵢ − Z̄(t)}^{⊗2} dt]⁻¹ [Σᵢ ∫ {Zᵢ − Z̄(t)} dNᵢ(t)]
//! ```
//!
//! Both `Yᵢ(t)` and `Z̄(t)` are constant between consecutive distinct observed
//! times, so the time integral is an exact finite sum. The cumulative
//! baseline hazard `Λ̃₀` that goes with `β̂` is piecewise linear between
//! failure times with upward jumps `d_l / r_l` at each of them; it need not
//! be monotone.

use crate::dataset::{failure_grid, FailureGrid, SurvivalDataset};
use crate::error::{Error, Result};
use crate::linalg::PivotedCholesky;

/// Fitted additive hazards model.
#[derive(Debug, Clone)]
pub struct AdditiveFit {
    pub beta: Vec<f64>,
    pub baseline: BaselineCumHazard,
    pub n: usize,
    pub p: usize,
    pub grid: FailureGrid,
}

impl AdditiveFit {
    /// `β̂` plus `Λ̃₀` for `ds`.
    pub fn fit(ds: &SurvivalDataset) -> Result<Self> {
        let beta = fit_beta(ds)?;
        Self::with_beta(ds, beta)
    }

    /// Baseline for a caller-supplied coefficient (e.g. `β = 0`).
    pub fn with_beta(ds: &SurvivalDataset, beta: Vec<f64>) -> Result<Self> {
        let grid = failure_grid(ds)?;
        let baseline = cumulative_baseline_on(ds, &grid, &beta)?;
        Ok(Self {
            n: ds.len(),
            p: ds.dim(),
            beta,
            baseline,
            grid,
        })
    }

    /// Largest observed failure time `t_K`.
    pub fn max_failure_time(&self) -> f64 {
        self.grid.last_time()
    }

    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        dot(&self.beta, z)
    }
}

/// `Λ̃₀` as knots `t₀ = 0 < t₁ < … < t_K`, with the linear correction active
/// on each open segment and the Nelson–Aalen-type jump at each failure time.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCumHazard {
    /// `t₀ = 0, t₁, …, t_K` (length `K + 1`).
    pub knot_times: Vec<f64>,
    /// `Λ̃₀(t_k)` (length `K + 1`, first entry 0).
    pub knot_values: Vec<f64>,
    /// `−β̂ᵀZ̄(t_{k+1})`, active on `[t_k, t_{k+1})` (length `K`).
    pub segment_slopes: Vec<f64>,
    /// `d_l / r_l` at `t_l` (length `K`).
    pub jump_sizes: Vec<f64>,
}

impl BaselineCumHazard {
    pub fn max_time(&self) -> f64 {
        *self.knot_times.last().expect("at least one knot")
    }

    /// Index `k` of the segment `[t_k, t_{k+1})` holding `t`, or `K` at `t_K`.
    fn segment(&self, t: f64) -> usize {
        self.knot_times.partition_point(|&x| x <= t) - 1
    }

    fn value_in(&self, k: usize, t: f64) -> f64 {
        if k + 1 == self.knot_times.len() {
            self.knot_values[k]
        } else {
            self.knot_values[k] + self.segment_slopes[k] * (t - self.knot_times[k])
        }
    }

    /// Evaluates `Λ̃₀` at each point of a non-decreasing grid inside `[0, t_K]`.
    pub fn eval_sorted(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.len());
        let mut k = 0;
        let last = self.knot_times.len() - 1;
        for &t in grid {
            check_domain(t, self.max_time())?;
            while k < last && self.knot_times[k + 1] <= t {
                k += 1;
            }
            out.push(self.value_in(k, t));
        }
        Ok(out)
    }
}

fn check_domain(t: f64, max: f64) -> Result<()> {
    if !(0.0..=max).contains(&t) {
        return Err(Error::OutOfDomain { time: t, max });
    }
    Ok(())
}

/// `Λ̃₀(t)` for `0 ≤ t ≤ t_K`.
pub fn eval_baseline(b: &BaselineCumHazard, t: f64) -> Result<f64> {
    check_domain(t, b.max_time())?;
    Ok(b.value_in(b.segment(t), t))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Z̄(t) = Σ Yᵢ(t) Zᵢ / Σ Yᵢ(t)` with `Yᵢ(t) = 1{Xᵢ ≥ t}`.
pub fn risk_set_mean(ds: &SurvivalDataset, t: f64) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; ds.dim()];
    let mut count = 0usize;
    for i in 0..ds.len() {
        if ds.times()[i] >= t {
            count += 1;
            for (s, z) in sum.iter_mut().zip(ds.z(i)) {
                *s += z;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyRiskSet { time: t });
    }
    sum.iter_mut().for_each(|s| *s /= count as f64);
    Ok(sum)
}

/// Groups of tied observed times, from the latest to the earliest:
/// `(time, members)` where `members` index into `ds.sorted_order()`.
fn descending_time_groups(ds: &SurvivalDataset) -> Vec<(f64, std::ops::Range<usize>)> {
    let order = ds.sorted_order();
    let times = ds.times();
    let mut groups = Vec::new();
    let mut end = order.len();
    while end > 0 {
        let t = times[order[end - 1]];
        let mut start = end - 1;
        while start > 0 && times[order[start - 1]] == t {
            start -= 1;
        }
        groups.push((t, start..end));
        end = start;
    }
    groups
}

/// Lin–Ying estimate `β̂ = A⁻¹ b`.
pub fn fit_beta(ds: &SurvivalDataset) -> Result<Vec<f64>> {
    if ds.event_count() == 0 {
        return Err(Error::NoFailures);
    }
    let p = ds.dim();
    let n = ds.len();
    let order = ds.sorted_order();

    // A and b are invariant to shifting Z; centring keeps the suffix-sum
    // updates well conditioned.
    let mut centre = vec![0.0; p];
    for i in 0..n {
        for (c, z) in centre.iter_mut().zip(ds.z(i)) {
            *c += z;
        }
    }
    centre.iter_mut().for_each(|c| *c /= n as f64);

    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut at_risk = 0usize;
    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    let mut zc = vec![0.0; p];
    let mut event_sum = vec![0.0; p];

    let groups = descending_time_groups(ds);
    for (g, (t, members)) in groups.iter().enumerate() {
        event_sum.iter_mut().for_each(|v| *v = 0.0);
        let mut deaths = 0usize;
        for &i in &order[members.clone()] {
            for ((c, z), m) in zc.iter_mut().zip(ds.z(i)).zip(&centre) {
                *c = z - m;
            }
            at_risk += 1;
            for r in 0..p {
                s1[r] += zc[r];
                for c in 0..p {
                    s2[r * p + c] += zc[r] * zc[c];
                }
            }
            if ds.events()[i] {
                deaths += 1;
                for (e, c) in event_sum.iter_mut().zip(&zc) {
                    *e += c;
                }
            }
        }
        let r = at_risk as f64;
        // Events at t contribute Σ (Zᵢ − Z̄(t)).
        for k in 0..p {
            b[k] += event_sum[k] - deaths as f64 * s1[k] / r;
        }
        // Risk set is {X ≥ t} on (previous distinct time, t].
        let previous = groups.get(g + 1).map_or(0.0, |(u, _)| *u);
        let width = t - previous;
        if width > 0.0 {
            for rr in 0..p {
                for c in 0..p {
                    a[rr * p + c] += width * (s2[rr * p + c] - s1[rr] * s1[c] / r);
                }
            }
        }
    }

    let chol = PivotedCholesky::factor(&a, p).map_err(|ratio| Error::DesignDegenerate { ratio })?;
    Ok(chol.solve(&b))
}

/// `Λ̃₀` for the given coefficient.
pub fn cumulative_baseline(ds: &SurvivalDataset, beta: &[f64]) -> Result<BaselineCumHazard> {
    let grid = failure_grid(ds)?;
    cumulative_baseline_on(ds, &grid, beta)
}

fn cumulative_baseline_on(ds: &SurvivalDataset, grid: &FailureGrid, beta: &[f64]) -> Result<BaselineCumHazard> {
    if beta.len() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: beta.len(),
        });
    }
    // β̂ᵀZ̄(t_l) at each failure time, from suffix sums of the linear predictor.
    let order = ds.sorted_order();
    let eta: Vec<f64> = (0..ds.len()).map(|i| dot(beta, ds.z(i))).collect();
    let k_total = grid.len();
    let mut mean_eta = vec![0.0; k_total];
    let mut pos = ds.len();
    let mut sum = 0.0;
    for l in (0..k_total).rev() {
        let t = grid.times[l];
        while pos > 0 && ds.times()[order[pos - 1]] >= t {
            pos -= 1;
            sum += eta[order[pos]];
        }
        mean_eta[l] = sum / grid.risk_counts[l] as f64;
    }

    let mut knot_times = Vec::with_capacity(k_total + 1);
    let mut knot_values = Vec::with_capacity(k_total + 1);
    let mut segment_slopes = Vec::with_capacity(k_total);
    let mut jump_sizes = Vec::with_capacity(k_total);
    knot_times.push(0.0);
    knot_values.push(0.0);
    let mut value = 0.0;
    let mut previous = 0.0;
    for l in 0..k_total {
        let t = grid.times[l];
        let jump = grid.event_counts[l] as f64 / grid.risk_counts[l] as f64;
        let slope = -mean_eta[l];
        value += jump + slope * (t - previous);
        knot_times.push(t);
        knot_values.push(value);
        segment_slopes.push(slope);
        jump_sizes.push(jump);
        previous = t;
    }
    Ok(BaselineCumHazard {
        knot_times,
        knot_values,
        segment_slopes,
        jump_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(times: &[f64], events: &[bool], z: &[f64]) -> SurvivalDataset {
        SurvivalDataset::new(
            times.to_vec(),
            events.to_vec(),
            z.iter().map(|&v| vec![v]).collect(),
            vec!["z".into()],
        )
        .unwrap()
    }

    #[test]
    fn risk_set_mean_basic() {
        let ds = dataset(&[1.0, 2.0], &[true, true], &[0.0, 1.0]);
        assert_eq!(risk_set_mean(&ds, 0.5).unwrap(), vec![0.5]);
        let err = risk_set_mean(&ds, 3.0).unwrap_err();
        assert!(err.to_string().contains("empty risk set"));
    }

    #[test]
    fn constant_covariate_is_degenerate() {
        let ds = dataset(&[1.0, 2.0, 3.0], &[true, true, false], &[2.0, 2.0, 2.0]);
        assert!(matches!(fit_beta(&ds), Err(Error::DesignDegenerate { .. })));
    }

    #[test]
    fn no_events_is_an_error() {
        let ds = dataset(&[1.0, 2.0], &[false, false], &[0.0, 1.0]);
        assert!(matches!(fit_beta(&ds), Err(Error::NoFailures)));
    }

    #[test]
    fn zero_beta_is_nelson_aalen() {
        let ds = dataset(&[1.0, 2.0, 2.0, 4.0], &[true, true, false, true], &[0.0, 1.0, 0.5, 1.0]);
        let b = cumulative_baseline(&ds, &[0.0]).unwrap();
        assert_eq!(b.knot_times, vec![0.0, 1.0, 2.0, 4.0]);
        let na = [0.0, 0.25, 0.25 + 1.0 / 3.0, 0.25 + 1.0 / 3.0 + 1.0];
        for (v, e) in b.knot_values.iter().zip(na) {
            assert!((v - e).abs() < 1e-15);
        }
        // flat between knots
        assert_eq!(eval_baseline(&b, 3.0).unwrap(), b.knot_values[2]);
    }

    #[test]
    fn hand_computed_knots() {
        // Subjects (X, δ, Z): (1,1,0), (2,1,1), (3,0,2). β = 0.5.
        // t1 = 1: r=3, Z̄=1 → Λ = 1/3 − 0.5·1·1 = −1/6.
        // t2 = 2: r=2, Z̄=1.5 → Λ = −1/6 + 1/2 − 0.5·1.5·1 = −5/12.
        let ds = dataset(&[1.0, 2.0, 3.0], &[true, true, false], &[0.0, 1.0, 2.0]);
        let b = cumulative_baseline(&ds, &[0.5]).unwrap();
        assert!((b.knot_values[1] + 1.0 / 6.0).abs() < 1e-15);
        assert!((b.knot_values[2] + 5.0 / 12.0).abs() < 1e-15);
        assert_eq!(b.segment_slopes, vec![-0.5, -0.75]);
        assert_eq!(eval_baseline(&b, 0.0).unwrap(), 0.0);
        assert_eq!(eval_baseline(&b, 1.0).unwrap(), b.knot_values[1]);
        assert_eq!(eval_baseline(&b, 2.0).unwrap(), b.knot_values[2]);
        // mid-segment: Λ(t_1) − β̂ᵀZ̄(t_2)(t − t_1)
        let mid = eval_baseline(&b, 1.5).unwrap();
        assert!((mid - (-1.0 / 6.0 - 0.75 * 0.5)).abs() < 1e-15);
        // before the first failure: −β̂ᵀZ̄(t_1) t
        assert!((eval_baseline(&b, 0.5).unwrap() + 0.25).abs() < 1e-15);
        assert!(eval_baseline(&b, 2.5).is_err());
        assert!(eval_baseline(&b, -0.1).is_err());
    }

    #[test]
    fn eval_sorted_matches_pointwise() {
        let ds = dataset(
            &[0.3, 1.0, 1.7, 2.0, 2.2],
            &[true, false, true, true, false],
            &[0.1, 1.0, 0.4, 0.0, 2.0],
        );
        let fit = AdditiveFit::fit(&ds).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let all = fit.baseline.eval_sorted(&grid).unwrap();
        for (t, v) in grid.iter().zip(all) {
            assert_eq!(v, eval_baseline(&fit.baseline, *t).unwrap());
        }
    }
}
