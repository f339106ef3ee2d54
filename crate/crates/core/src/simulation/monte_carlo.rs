use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cox::{fit_cox, r2_cox};
use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::explained_variation::{r2_tau, R2Options, VarianceComponents};
use crate::linying::AdditiveFit;
use crate::zgivent::r2_z_given_t;

use super::scenario::{generate_with, Scenario};

pub const MIN_REPS: usize = 2;

#[derive(Debug, Clone)]
pub struct MonteCarloOptions {
    pub reps: usize,
    pub seed: u64,
    pub r2: R2Options,
    pub cox: bool,
    /// `R²_{Z|T}` with the scenario's true baseline hazard (scalar models only).
    pub z_given_t: bool,
    /// Covariate subsets to fit; empty means the full model only.
    pub models: Vec<Vec<usize>>,
}

impl MonteCarloOptions {
    pub fn new(reps: usize, seed: u64) -> Self {
        Self {
            reps,
            seed,
            r2: R2Options::default(),
            cox: false,
            z_given_t: false,
            models: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelOutcome {
    pub beta_hat: Vec<f64>,
    pub r2: f64,
    pub components: VarianceComponents,
    pub refinement_level: u32,
    pub r2_cox: Option<f64>,
    pub r2_z_given_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub censoring: f64,
    pub models: Vec<ModelOutcome>,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub sd: f64,
}

impl MomentSummary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        Self {
            mean,
            sd: if v.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub covariates: Vec<usize>,
    pub beta_hat: Vec<MomentSummary>,
    pub r2: MomentSummary,
    pub r2_cox: Option<MomentSummary>,
    pub r2_z_given_t: Option<MomentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub reps: usize,
    pub seed: u64,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub censoring: MomentSummary,
    pub models: Vec<ModelSummary>,
    /// Per-replicate results in replicate order; `None` for failed replicates.
    #[serde(skip)]
    pub replicates: Vec<Option<ReplicateOutcome>>,
}

/// The dataset of replicate `index`: stream `index` of a ChaCha8 generator
/// keyed by the master seed.
pub fn replicate_dataset(scenario: &Scenario, master_seed: u64, index: usize) -> Result<SurvivalDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    generate_with(scenario, &mut rng)
}

fn run_replicate(
    scenario: &Scenario,
    options: &MonteCarloOptions,
    models: &[Vec<usize>],
    index: usize,
) -> Result<ReplicateOutcome> {
    let ds = replicate_dataset(scenario, options.seed, index)?;
    let mut out = Vec::with_capacity(models.len());
    for columns in models {
        let sub = ds.select_covariates(columns)?;
        let fit = AdditiveFit::fit(&sub)?;
        let report = r2_tau(&fit, &sub, &options.r2)?;
        let r2_cox = if options.cox {
            Some(r2_cox(&fit_cox(&sub)?, &sub, &options.r2)?.r2)
        } else {
            None
        };
        let r2_z_given_t = if options.z_given_t {
            Some(r2_z_given_t(&sub, fit.beta[0], scenario.baseline)?)
        } else {
            None
        };
        out.push(ModelOutcome {
            components: VarianceComponents {
                total: report.total_variance,
                residual: report.residual_variance,
                explained: report.explained_variance,
            },
            refinement_level: report.refinement_trace.last().map_or(0, |s| s.level),
            beta_hat: fit.beta,
            r2: report.r2,
            r2_cox,
            r2_z_given_t,
        });
    }
    Ok(ReplicateOutcome {
        censoring: ds.censoring_fraction(),
        models: out,
    })
}

/// Runs `options.reps` independent replicates in parallel. Failed replicates
/// are counted; more than 10% failures is an error.
pub fn run_monte_carlo(scenario: &Scenario, options: &MonteCarloOptions) -> Result<MonteCarloSummary> {
    scenario.validate()?;
    if options.reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_REPS} replicates")));
    }
    let p = scenario.beta.len();
    let models: Vec<Vec<usize>> = if options.models.is_empty() {
        vec![(0..p).collect()]
    } else {
        options.models.clone()
    };
    for m in &models {
        if m.is_empty() || m.iter().any(|&j| j >= p) {
            return Err(Error::InvalidArgument(format!("model {m:?} is not a subset of 0..{p}")));
        }
        if options.z_given_t && m.len() != 1 {
            return Err(Error::InvalidArgument("R²_{Z|T} needs single-covariate models".into()));
        }
    }
    let results: Vec<Result<ReplicateOutcome>> = (0..options.reps)
        .into_par_iter()
        .map(|r| run_replicate(scenario, options, &models, r))
        .collect();

    let failures = results.iter().filter(|r| r.is_err()).count();
    let first_failure = results.iter().find_map(|r| r.as_ref().err().map(|e| e.to_string()));
    if failures * 10 > options.reps {
        return Err(Error::TooManyFailures {
            failed: failures,
            reps: options.reps,
            first: first_failure.unwrap_or_default(),
        });
    }
    if let Some(msg) = &first_failure {
        log::warn!("{failures} of {} replicates failed; first: {msg}", options.reps);
    }
    let replicates: Vec<Option<ReplicateOutcome>> = results.into_iter().map(Result::ok).collect();
    let ok: Vec<&ReplicateOutcome> = replicates.iter().flatten().collect();

    let summaries = models
        .iter()
        .enumerate()
        .map(|(k, columns)| {
            let outcomes = || ok.iter().map(move |r| &r.models[k]);
            ModelSummary {
                covariates: columns.clone(),
                beta_hat: (0..columns.len())
                    .map(|j| MomentSummary::of(outcomes().map(|m| m.beta_hat[j])))
                    .collect(),
                r2: MomentSummary::of(outcomes().map(|m| m.r2)),
                r2_cox: options
                    .cox
                    .then(|| MomentSummary::of(outcomes().filter_map(|m| m.r2_cox))),
                r2_z_given_t: options
                    .z_given_t
                    .then(|| MomentSummary::of(outcomes().filter_map(|m| m.r2_z_given_t))),
            }
        })
        .collect();

    Ok(MonteCarloSummary {
        reps: options.reps,
        seed: options.seed,
        failures,
        first_failure,
        censoring: MomentSummary::of(ok.iter().map(|r| r.censoring)),
        models: summaries,
        replicates,
    })
}
