use serde::Serialize;

use crate::error::{Error, Result};
use crate::zgivent::BaselineHazard;

use super::scenario::{tau_for_censoring, Censoring, CovariateLaw, Scenario};

pub const PRESET_NAMES: [&str; 5] = ["table1", "table2", "table3", "table4", "figure2"];

const N: usize = 1000;

/// One configuration of a published simulation layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetRow {
    pub label: String,
    pub scenario: Scenario,
    /// Covariate subsets to fit; empty means the full model.
    pub models: Vec<Vec<usize>>,
    pub cox: bool,
    pub z_given_t: bool,
}

fn single(baseline: BaselineHazard, beta: f64, law: CovariateLaw, censoring: Censoring) -> Scenario {
    Scenario {
        baseline,
        beta: vec![beta],
        covariates: vec![law],
        censoring,
        n: N,
        seed: 0,
    }
}

fn row(label: String, scenario: Scenario) -> PresetRow {
    PresetRow {
        label,
        scenario,
        models: Vec::new(),
        cox: false,
        z_given_t: false,
    }
}

fn tau_label(c: Censoring) -> String {
    match c {
        Censoring::None => "inf".into(),
        Censoring::Uniform { tau } => format!("{tau}"),
    }
}

/// Rows of a named preset (`table1` … `table4`, `figure2`).
pub fn preset(name: &str) -> Result<Vec<PresetRow>> {
    let unit = BaselineHazard::Constant(1.0);
    let families = [unit, BaselineHazard::Linear(1.0), BaselineHazard::Root(1.0)];
    match name {
        "table1" => {
            let mut rows = Vec::new();
            for beta in [1.0, 3.0, 15.0, 50.0] {
                for law in [CovariateLaw::Uniform, CovariateLaw::Binary] {
                    for c in [
                        Censoring::None,
                        Censoring::Uniform { tau: 4.3 },
                        Censoring::Uniform { tau: 1.3 },
                    ] {
                        let label = format!("beta={beta},cov={law},tau={}", tau_label(c));
                        rows.push(row(label, single(unit, beta, law, c)));
                    }
                }
            }
            Ok(rows)
        }
        "table2" => Ok(families
            .iter()
            .map(|&baseline| PresetRow {
                label: format!("baseline={baseline}"),
                scenario: Scenario {
                    baseline,
                    beta: vec![1.0, 3.0, 1.0, 0.0],
                    covariates: vec![CovariateLaw::Uniform; 4],
                    censoring: Censoring::None,
                    n: N,
                    seed: 0,
                },
                models: vec![
                    vec![0],
                    vec![1],
                    vec![2],
                    vec![3],
                    vec![0, 2],
                    vec![0, 1, 2],
                    vec![0, 1, 2, 3],
                ],
                cox: false,
                z_given_t: false,
            })
            .collect()),
        "table3" => {
            let mut rows = Vec::new();
            for beta in [1.0, 3.0, 15.0, 50.0] {
                for percent in [0u32, 30] {
                    let censoring = if percent == 0 {
                        Censoring::None
                    } else {
                        let target = f64::from(percent) / 100.0;
                        Censoring::Uniform {
                            tau: tau_for_censoring(unit, &[beta], &[CovariateLaw::Binary], target)?,
                        }
                    };
                    let mut r = row(
                        format!("beta={beta},cov=binary,censor={percent}%"),
                        single(unit, beta, CovariateLaw::Binary, censoring),
                    );
                    r.cox = true;
                    rows.push(r);
                }
            }
            Ok(rows)
        }
        "table4" => Ok([1.0, 3.0, 15.0, 50.0, 100.0, 1000.0]
            .into_iter()
            .map(|beta| {
                let mut r = row(
                    format!("beta={beta},cov=binary,tau=inf"),
                    single(unit, beta, CovariateLaw::Binary, Censoring::None),
                );
                r.z_given_t = true;
                r
            })
            .collect()),
        "figure2" => Ok(families
            .iter()
            .map(|&baseline| {
                row(
                    format!("baseline={baseline},beta=3,cov=binary"),
                    single(baseline, 3.0, CovariateLaw::Binary, Censoring::None),
                )
            })
            .collect()),
        other => Err(Error::InvalidScenario(format!(
            "unknown preset '{other}' (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESET_NAMES {
            let rows = preset(name).unwrap();
            assert!(!rows.is_empty());
            for r in rows {
                r.scenario.validate().unwrap();
            }
        }
        assert_eq!(preset("table1").unwrap().len(), 24);
        assert!(preset("table9").is_err());
    }
}
