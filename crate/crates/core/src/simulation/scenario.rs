use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::zgivent::BaselineHazard;

/// Marginal law of one covariate coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    /// Bernoulli(0.5) on `{0, 1}`.
    Binary,
    /// Uniform on `[0, √3]`, which has unit variance.
    Uniform,
}

impl CovariateLaw {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Binary => (0.0, 1.0),
            Self::Uniform => (0.0, 3f64.sqrt()),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Binary => f64::from(u8::from(rng.random::<bool>())),
            Self::Uniform => rng.random::<f64>() * 3f64.sqrt(),
        }
    }
}

impl fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Binary => "binary",
            Self::Uniform => "uniform",
        })
    }
}

impl FromStr for CovariateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "binary" | "bernoulli" => Ok(Self::Binary),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidScenario(format!(
                "unknown covariate law '{other}' (expected binary or uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Censoring {
    None,
    /// `C ~ U[0, τ]`.
    Uniform {
        tau: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub baseline: BaselineHazard,
    pub beta: Vec<f64>,
    pub covariates: Vec<CovariateLaw>,
    pub censoring: Censoring,
    pub n: usize,
    pub seed: u64,
}

impl Scenario {
    /// Single binary covariate, constant unit baseline, no censoring.
    pub fn new(beta: Vec<f64>, covariates: Vec<CovariateLaw>, n: usize, seed: u64) -> Result<Self> {
        let s = Self {
            baseline: BaselineHazard::Constant(1.0),
            beta,
            covariates,
            censoring: Censoring::None,
            n,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// Smallest `βᵀz` over the covariate support.
    pub fn min_linear_predictor(&self) -> f64 {
        self.beta
            .iter()
            .zip(&self.covariates)
            .map(|(&b, law)| {
                let (lo, hi) = law.support();
                (b * lo).min(b * hi)
            })
            .sum()
    }

    /// Checks dimensions, `n`, `τ` and positivity of the hazard at the worst
    /// corner of the covariate support.
    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.covariates.len() || self.beta.is_empty() {
            return Err(Error::InvalidScenario(format!(
                "{} coefficients for {} covariates",
                self.beta.len(),
                self.covariates.len()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidScenario("non-finite coefficient".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidScenario("sample size must be positive".into()));
        }
        if let Censoring::Uniform { tau } = self.censoring {
            if !(tau > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "censoring bound τ={tau} must be positive"
                )));
            }
        }
        check_hazard(self.baseline, self.min_linear_predictor())
    }
}

/// `λ₀(t) + b > 0` for every `t > 0`.
fn check_hazard(baseline: BaselineHazard, b: f64) -> Result<()> {
    let ok = match baseline {
        BaselineHazard::Constant(c) => c + b > 0.0,
        BaselineHazard::Linear(_) | BaselineHazard::Root(_) => b >= 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidScenario(format!(
            "hazard λ₀(t) + {b} is not positive for every t > 0 with baseline {baseline}"
        )))
    }
}

/// Solves `Λ₀(T) + βᵀz·T = −log u`.
pub fn sample_event_time(scenario: &Scenario, z: &[f64], u: f64) -> Result<f64> {
    if z.len() != scenario.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: scenario.beta.len(),
            found: z.len(),
        });
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::InvalidArgument(format!("uniform draw {u} outside (0, 1]")));
    }
    let b: f64 = scenario.beta.iter().zip(z).map(|(b, z)| b * z).sum();
    check_hazard(scenario.baseline, b)?;
    Ok(invert(scenario.baseline, b, -u.ln()))
}

/// Inverse of `t ↦ Λ₀(t) + b·t` at `e`, in cancellation-free form.
fn invert(baseline: BaselineHazard, b: f64, e: f64) -> f64 {
    match baseline {
        BaselineHazard::Constant(c) => e / (c + b),
        // a t²/2 + b t = e
        BaselineHazard::Linear(a) => 2.0 * e / (b + (b * b + 2.0 * a * e).sqrt()),
        // a √t + b t = e, quadratic in √t
        BaselineHazard::Root(a) => {
            let r = 2.0 * e / (a + (a * a + 4.0 * b * e).sqrt());
            r * r
        }
    }
}

/// Draws a dataset with the scenario's own seed.
pub fn generate(scenario: &Scenario) -> Result<SurvivalDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    generate_with(scenario, &mut rng)
}

/// Draws `n` subjects from `rng`: covariates, then the event time, then the
/// censoring time.
pub fn generate_with<R: Rng>(scenario: &Scenario, rng: &mut R) -> Result<SurvivalDataset> {
    scenario.validate()?;
    let p = scenario.beta.len();
    let mut times = Vec::with_capacity(scenario.n);
    let mut events = Vec::with_capacity(scenario.n);
    let mut covariates = Vec::with_capacity(scenario.n * p);
    for _ in 0..scenario.n {
        let z: Vec<f64> = scenario.covariates.iter().map(|law| law.draw(rng)).collect();
        let b: f64 = scenario.beta.iter().zip(&z).map(|(b, z)| b * z).sum();
        // `1 − U[0,1)` lies in (0, 1], so the exponential draw is finite.
        let e = -(1.0 - rng.random::<f64>()).ln();
        let t = invert(scenario.baseline, b, e);
        let (x, d) = match scenario.censoring {
            Censoring::None => (t, true),
            Censoring::Uniform { tau } => {
                let c = rng.random::<f64>() * tau;
                if t <= c {
                    (t, true)
                } else {
                    (c, false)
                }
            }
        };
        times.push(x);
        events.push(d);
        covariates.extend(z);
    }
    let names = (1..=p).map(|j| format!("z{j}")).collect();
    SurvivalDataset::from_flat(times, events, covariates, names)
}

const TOL: f64 = 1e-10;

/// `E_Z[f(βᵀZ)]` under independent coordinates.
fn expect_over<F: Fn(f64) -> f64>(beta: &[f64], laws: &[CovariateLaw], offset: f64, f: &F) -> f64 {
    match (beta.split_first(), laws.split_first()) {
        (Some((&b, rest_b)), Some((law, rest_l))) => match law {
            CovariateLaw::Binary => {
                0.5 * (expect_over(rest_b, rest_l, offset, f) + expect_over(rest_b, rest_l, offset + b, f))
            }
            CovariateLaw::Uniform => {
                let hi = 3f64.sqrt();
                integrate(|z| expect_over(rest_b, rest_l, offset + b * z, f), 0.0, hi, 0.0, TOL).value / hi
            }
        },
        _ => f(offset),
    }
}

/// Population `P(C < T)` for `C ~ U[0, τ]`.
pub fn censoring_probability(baseline: BaselineHazard, beta: &[f64], laws: &[CovariateLaw], tau: f64) -> f64 {
    expect_over(beta, laws, 0.0, &|b| {
        integrate(|c| (-baseline.cumulative(c) - b * c).exp(), 0.0, tau, 0.0, TOL).value / tau
    })
}

/// `τ` giving a target censoring fraction under `C ~ U[0, τ]`, by bisection.
pub fn tau_for_censoring(baseline: BaselineHazard, beta: &[f64], laws: &[CovariateLaw], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidScenario(format!(
            "censoring target {target} outside (0, 1)"
        )));
    }
    let probe = Scenario {
        baseline,
        beta: beta.to_vec(),
        covariates: laws.to_vec(),
        censoring: Censoring::None,
        n: 1,
        seed: 0,
    };
    probe.validate()?;
    // Censoring probability falls from 1 at τ → 0 to 0 as τ → ∞.
    let mut hi = 1.0;
    while censoring_probability(baseline, beta, laws, hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidScenario("censoring target not reachable".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if censoring_probability(baseline, beta, laws, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Applies `key=value` pairs (separated by `,` or newlines, `#` starts a
/// comment) to `scenario`. Keys: `beta` (`;`-separated vector), `cov`
/// (`;`-separated laws, or one law for every coordinate), `tau`
/// (`inf` or a number), `censor` (target fraction, `0.3` or `30%`),
/// `baseline`, `n`, `seed`.
pub fn parse_assignments(scenario: &mut Scenario, text: &str) -> Result<()> {
    let mut censor_target = None;
    let mut laws_text = None;
    for item in text.lines().flat_map(|l| l.split('#').next().unwrap_or("").split(',')) {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidScenario(format!("expected key=value, found '{item}'")))?;
        let value = value.trim();
        let number = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::InvalidScenario(format!("bad number '{v}' for {}", key.trim())))
        };
        match key.trim() {
            "beta" => scenario.beta = value.split(';').map(|v| number(v.trim())).collect::<Result<_>>()?,
            "cov" | "z" => laws_text = Some(value.to_string()),
            "tau" => {
                scenario.censoring = if matches!(value, "inf" | "∞" | "none") {
                    Censoring::None
                } else {
                    Censoring::Uniform { tau: number(value)? }
                }
            }
            "censor" => {
                let frac = match value.strip_suffix('%') {
                    Some(pct) => number(pct.trim())? / 100.0,
                    None => number(value)?,
                };
                censor_target = Some(frac);
            }
            "baseline" | "lambda0" => {
                scenario.baseline = value
                    .parse()
                    .map_err(|e: Error| Error::InvalidScenario(e.to_string()))?
            }
            "n" => {
                scenario.n = value
                    .parse()
                    .map_err(|_| Error::InvalidScenario(format!("bad sample size '{value}'")))?
            }
            "seed" => {
                scenario.seed = value
                    .parse()
                    .map_err(|_| Error::InvalidScenario(format!("bad seed '{value}'")))?
            }
            other => return Err(Error::InvalidScenario(format!("unknown scenario key '{other}'"))),
        }
    }
    if let Some(text) = laws_text {
        let laws: Vec<CovariateLaw> = text.split(';').map(str::parse).collect::<Result<_>>()?;
        scenario.covariates = if laws.len() == 1 {
            vec![laws[0]; scenario.beta.len()]
        } else {
            laws
        };
    } else if scenario.covariates.len() != scenario.beta.len() {
        if let Some(&first) = scenario.covariates.first() {
            scenario.covariates = vec![first; scenario.beta.len()];
        }
    }
    if let Some(target) = censor_target {
        scenario.censoring = if target == 0.0 {
            Censoring::None
        } else {
            Censoring::Uniform {
                tau: tau_for_censoring(scenario.baseline, &scenario.beta, &scenario.covariates, target)?,
            }
        };
    }
    scenario.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(baseline: BaselineHazard, beta: f64) -> Scenario {
        Scenario {
            baseline,
            beta: vec![beta],
            covariates: vec![CovariateLaw::Binary],
            censoring: Censoring::None,
            n: 10,
            seed: 1,
        }
    }

    #[test]
    fn inversion_examples() {
        let s = scenario(BaselineHazard::Constant(1.0), 1.0);
        assert!((sample_event_time(&s, &[0.0], (-1f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        let s = scenario(BaselineHazard::Linear(1.0), 1.0);
        assert!((sample_event_time(&s, &[0.0], (-2f64).exp()).unwrap() - 2.0).abs() < 1e-14);
        let s = scenario(BaselineHazard::Root(1.0), 1.0);
        assert!((sample_event_time(&s, &[0.0], (-2f64).exp()).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn inversion_solves_cumulative_hazard() {
        for baseline in [
            BaselineHazard::Constant(1.0),
            BaselineHazard::Linear(1.0),
            BaselineHazard::Root(1.0),
        ] {
            let s = scenario(baseline, 2.5);
            for &u in &[1e-12, 0.01, 0.3, 0.9, 1.0 - 1e-12] {
                let t = sample_event_time(&s, &[1.0], u).unwrap();
                let e = -u.ln();
                assert!(
                    (baseline.cumulative(t) + 2.5 * t - e).abs() <= 1e-12 * e.max(1e-300),
                    "{baseline} {u}"
                );
            }
        }
    }

    #[test]
    fn rejects_negative_hazard() {
        let mut s = scenario(BaselineHazard::Constant(1.0), -2.0);
        assert!(s.validate().is_err());
        s.beta = vec![-0.5];
        assert!(s.validate().is_ok());
        assert!(sample_event_time(&scenario(BaselineHazard::Linear(1.0), -0.5), &[1.0], 0.5).is_err());
    }

    #[test]
    fn deterministic_and_uncensored() {
        let s = scenario(BaselineHazard::Constant(1.0), 3.0);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.times(), b.times());
        assert_eq!(a.covariates_flat(), b.covariates_flat());
        assert!(a.events().iter().all(|&d| d));
    }

    #[test]
    fn censoring_probability_closed_form() {
        // P(C < T | b) = (1 − e^{−(1+b)τ}) / ((1+b)τ)
        let tau = 1.3;
        let p = censoring_probability(BaselineHazard::Constant(1.0), &[1.0], &[CovariateLaw::Binary], tau);
        let f = |r: f64| (1.0 - (-r * tau).exp()) / (r * tau);
        assert!((p - 0.5 * (f(1.0) + f(2.0))).abs() < 1e-12);
        let tau = tau_for_censoring(BaselineHazard::Constant(1.0), &[3.0], &[CovariateLaw::Binary], 0.3).unwrap();
        let p = censoring_probability(BaselineHazard::Constant(1.0), &[3.0], &[CovariateLaw::Binary], tau);
        assert!((p - 0.3).abs() < 1e-9);
    }

    #[test]
    fn parses_rows() {
        let mut s = scenario(BaselineHazard::Constant(1.0), 1.0);
        parse_assignments(&mut s, "beta=3,cov=uniform,tau=4.3,n=50").unwrap();
        assert_eq!(s.beta, vec![3.0]);
        assert_eq!(s.covariates, vec![CovariateLaw::Uniform]);
        assert_eq!(s.censoring, Censoring::Uniform { tau: 4.3 });
        assert_eq!(s.n, 50);
        parse_assignments(&mut s, "# comment\nbeta=1;3;1;0\ncov=uniform\ntau=inf").unwrap();
        assert_eq!(s.covariates.len(), 4);
        assert_eq!(s.censoring, Censoring::None);
        assert!(parse_assignments(&mut s, "colour=red").is_err());
        assert!(parse_assignments(&mut s, "beta=-5;0;0;0").is_err());
    }
}
