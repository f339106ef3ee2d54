//! Reference Cox proportional hazards fit (Breslow ties, Breslow baseline)
//! and the matching `R²_cox`, for side-by-side comparison with the additive
//! model when both hold.

use crate::condsurv::ConditionalModel;
use crate::dataset::{failure_grid, SurvivalDataset};
use crate::error::{Error, Result};
use crate::explained_variation::{r2_tau, ExplainedVariationReport, R2Options};
use crate::linalg::PivotedCholesky;
use crate::linying::dot;

pub const MAX_ITERATIONS: usize = 50;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const STEP_TOLERANCE: f64 = 1e-6;
/// Coefficients beyond this with the likelihood still rising signal separation.
pub const SEPARATION_LIMIT: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    /// Covariate means; the linear predictor is `βᵀ(z − centre)`.
    pub centre: Vec<f64>,
    /// Distinct failure times.
    pub times: Vec<f64>,
    /// Breslow `Λ̂₀(t_l)` for the centred predictor.
    pub breslow: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
}

struct Derivatives {
    loglik: f64,
    gradient: Vec<f64>,
    information: Vec<f64>,
}

fn centred(ds: &SurvivalDataset) -> (Vec<f64>, Vec<f64>) {
    let p = ds.dim();
    let n = ds.len();
    let mut centre = vec![0.0; p];
    for i in 0..n {
        for (c, z) in centre.iter_mut().zip(ds.z(i)) {
            *c += z;
        }
    }
    centre.iter_mut().for_each(|c| *c /= n as f64);
    let mut zc = Vec::with_capacity(n * p);
    for i in 0..n {
        zc.extend(ds.z(i).iter().zip(&centre).map(|(z, c)| z - c));
    }
    (centre, zc)
}

/// Log partial likelihood (Breslow ties), its gradient and information.
fn derivatives(ds: &SurvivalDataset, zc: &[f64], beta: &[f64]) -> Derivatives {
    let p = beta.len();
    let order = ds.sorted_order();
    let times = ds.times();
    let events = ds.events();
    let eta: Vec<f64> = (0..ds.len()).map(|i| dot(beta, &zc[i * p..(i + 1) * p])).collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut out = Derivatives {
        loglik: 0.0,
        gradient: vec![0.0; p],
        information: vec![0.0; p * p],
    };
    let mut end = order.len();
    while end > 0 {
        let t = times[order[end - 1]];
        let mut start = end - 1;
        while start > 0 && times[order[start - 1]] == t {
            start -= 1;
        }
        let mut deaths = 0usize;
        for &i in &order[start..end] {
            let z = &zc[i * p..(i + 1) * p];
            let w = (eta[i] - shift).exp();
            s0 += w;
            for r in 0..p {
                s1[r] += w * z[r];
                for c in 0..p {
                    s2[r * p + c] += w * z[r] * z[c];
                }
            }
            if events[i] {
                deaths += 1;
                out.loglik += eta[i];
                for (g, zr) in out.gradient.iter_mut().zip(z) {
                    *g += zr;
                }
            }
        }
        if deaths > 0 {
            let d = deaths as f64;
            out.loglik -= d * (s0.ln() + shift);
            for r in 0..p {
                let mr = s1[r] / s0;
                out.gradient[r] -= d * mr;
                for c in 0..p {
                    out.information[r * p + c] += d * (s2[r * p + c] / s0 - mr * s1[c] / s0);
                }
            }
        }
        end = start;
    }
    out
}

/// Log partial likelihood at `beta` (uncentred covariates give the same value).
pub fn log_partial_likelihood(ds: &SurvivalDataset, beta: &[f64]) -> f64 {
    let (_, zc) = centred(ds);
    derivatives(ds, &zc, beta).loglik
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton–Raphson maximisation of the partial likelihood with step halving.
pub fn fit_cox(ds: &SurvivalDataset) -> Result<CoxFit> {
    let grid = failure_grid(ds)?;
    let p = ds.dim();
    let (centre, zc) = centred(ds);
    let mut beta = vec![0.0; p];
    let mut current = derivatives(ds, &zc, &beta);
    let null_log_likelihood = current.loglik;
    let null_information = current.information.clone();
    let mut iterations = 0;
    loop {
        let gnorm = norm(&current.gradient);
        let chol =
            PivotedCholesky::factor(&current.information, p).map_err(|ratio| Error::DesignDegenerate { ratio })?;
        let step = chol.solve(&current.gradient);
        // Under separation the gradient vanishes while Newton steps stay O(1).
        if gnorm < GRADIENT_TOLERANCE && step.iter().all(|s| s.abs() < STEP_TOLERANCE) {
            break;
        }
        // Far enough out the gradient underflows to zero; a collapsed
        // information diagonal gives the separation away.
        if (0..p).any(|j| current.information[j * p + j] < 1e-10 * null_information[j * p + j]) {
            return Err(Error::Separation {
                limit: SEPARATION_LIMIT,
            });
        }
        if iterations == MAX_ITERATIONS {
            return Err(Error::CoxNotConverged {
                iterations,
                gradient_norm: gnorm,
            });
        }
        iterations += 1;
        let mut scale = 1.0;
        let (next_beta, next) = loop {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let d = derivatives(ds, &zc, &candidate);
            if d.loglik >= current.loglik - 1e-12 * current.loglik.abs() || scale < 1e-9 {
                break (candidate, d);
            }
            scale *= 0.5;
        };
        beta = next_beta;
        current = next;
        if beta.iter().any(|b| b.abs() > SEPARATION_LIMIT) {
            return Err(Error::Separation {
                limit: SEPARATION_LIMIT,
            });
        }
    }

    // Breslow baseline for the centred predictor.
    let order = ds.sorted_order();
    let eta: Vec<f64> = (0..ds.len()).map(|i| dot(&beta, &zc[i * p..(i + 1) * p])).collect();
    let mut denominators = vec![0.0; grid.len()];
    let mut pos = ds.len();
    let mut s0 = 0.0;
    for l in (0..grid.len()).rev() {
        while pos > 0 && ds.times()[order[pos - 1]] >= grid.times[l] {
            pos -= 1;
            s0 += eta[order[pos]].exp();
        }
        denominators[l] = s0;
    }
    let mut acc = 0.0;
    let breslow = grid
        .event_counts
        .iter()
        .zip(&denominators)
        .map(|(&d, &s)| {
            acc += d as f64 / s;
            acc
        })
        .collect();

    Ok(CoxFit {
        gradient_norm: norm(&current.gradient),
        log_likelihood: current.loglik,
        null_log_likelihood,
        beta,
        centre,
        times: grid.times,
        breslow,
        iterations,
    })
}

impl CoxFit {
    /// Breslow cumulative baseline (centred predictor) at `t`.
    pub fn cumulative_baseline(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            0.0
        } else {
            self.breslow[k - 1]
        }
    }
}

impl ConditionalModel for CoxFit {
    fn dim(&self) -> usize {
        self.beta.len()
    }

    fn max_failure_time(&self) -> f64 {
        *self.times.last().expect("at least one failure")
    }

    fn failure_times(&self) -> &[f64] {
        &self.times
    }

    fn linear_predictor(&self, z: &[f64]) -> f64 {
        self.beta
            .iter()
            .zip(z)
            .zip(&self.centre)
            .map(|((b, z), c)| b * (z - c))
            .sum()
    }

    fn baseline_on(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let max = self.max_failure_time();
        let mut out = Vec::with_capacity(grid.len());
        let mut k = 0;
        for &t in grid {
            if !(0.0..=max).contains(&t) {
                return Err(Error::OutOfDomain { time: t, max });
            }
            while k < self.times.len() && self.times[k] <= t {
                k += 1;
            }
            out.push(if k == 0 { 0.0 } else { self.breslow[k - 1] });
        }
        Ok(out)
    }

    /// `S(t|z) = exp(−Λ̂₀(t) e^{η})`.
    fn raw_survival_into(&self, eta: f64, _grid: &[f64], baseline: &[f64], out: &mut [f64]) {
        let hr = eta.exp();
        for (o, &b) in out.iter_mut().zip(baseline) {
            *o = (-b * hr).exp();
        }
    }
}

/// `R²_cox`: the explained-variation pipeline run on Cox conditional curves.
pub fn r2_cox(fit: &CoxFit, ds: &SurvivalDataset, options: &R2Options) -> Result<ExplainedVariationReport> {
    r2_tau(fit, ds, options)
}
