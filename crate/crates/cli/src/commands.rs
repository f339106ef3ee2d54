use std::io::Write;

use addhaz::condsurv::{adjust_monotone, raw_conditional};
use addhaz::dataset::{save_csv, split};
use addhaz::diagnostics::cumhaz_difference;
use addhaz::explained_variation::{out_of_sample_r2, Marginal};
use addhaz::simulation::{
    omega2_analytic, omega2_large_sample, parse_assignments, preset, replicate_dataset, run_monte_carlo, Censoring,
    CovariateLaw, MonteCarloOptions, MonteCarloSummary, PresetRow, Scenario, DEFAULT_LARGE_SAMPLE, PRESET_NAMES,
};
use addhaz::zgivent::r2_z_given_t;
use addhaz::{
    fit_cox, load_csv, r2_tau, AdditiveFit, BaselineHazard, Error, ExplainedVariationReport, R2Options, SurvivalDataset,
};
use anyhow::{Context, Result};
use serde::Serialize;

use crate::args::{DataArgs, DiagnoseArgs, FitArgs, MarginalKind, ModelKind, R2Args, SimulateArgs, SplitArgs};
use crate::output::{create, emit_json, write_table, Input, Manifest};

fn load(args: &DataArgs) -> Result<SurvivalDataset> {
    Ok(load_csv(&args.data, &args.time, &args.event)?)
}

fn usage(message: String) -> anyhow::Error {
    Error::InvalidArgument(message).into()
}

#[derive(Serialize)]
struct FitOutput<'a> {
    covariates: &'a [String],
    beta: &'a [f64],
    n: usize,
    events: usize,
    max_failure_time: f64,
    knots: usize,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let fit = AdditiveFit::fit(&ds)?;
    if let Some(path) = &args.knots {
        let b = &fit.baseline;
        let rows = b
            .knot_times
            .iter()
            .zip(&b.knot_values)
            .map(|(t, v)| vec![t.to_string(), v.to_string()]);
        write_table(path, &["time", "cumhaz"], rows)?;
    }
    if let Some(path) = &args.curves {
        let grid = &fit.baseline.knot_times;
        let mut w = create(path)?;
        writeln!(w, "subject,time,survival")?;
        for i in 0..ds.len() {
            let curve = adjust_monotone(grid, &raw_conditional(&fit, ds.z(i), grid)?);
            for (t, s) in curve.times.iter().zip(&curve.values) {
                writeln!(w, "{i},{t},{s}")?;
            }
        }
        w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    }
    let out = FitOutput {
        covariates: ds.covariate_names(),
        beta: &fit.beta,
        n: ds.len(),
        events: ds.event_count(),
        max_failure_time: fit.max_failure_time(),
        knots: fit.baseline.knot_times.len(),
    };
    let manifest = Manifest::new("fit", args, vec![Input::of(&args.data.data, &ds)], None);
    emit_json(&manifest, &out, args.json.as_deref())
}

#[derive(Serialize)]
struct OutOfSample {
    train_n: usize,
    test_n: usize,
    r2_out: f64,
    report: ExplainedVariationReport,
}

#[derive(Serialize)]
struct R2Output<'a> {
    model: ModelKind,
    covariates: &'a [String],
    beta: Vec<f64>,
    r2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r2_z_given_t: Option<f64>,
    report: ExplainedVariationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_of_sample: Option<OutOfSample>,
}

pub fn r2(args: &R2Args) -> Result<()> {
    let ds = load(&args.data)?;
    if args.z_given_t && args.model != ModelKind::Additive {
        return Err(usage("--z-given-t needs --model additive".into()));
    }
    let options = R2Options {
        base_spacing: args.spacing,
        tolerance: args.tol,
        marginal: match args.marginal {
            MarginalKind::Mixture => Marginal::Mixture,
            MarginalKind::Km => Marginal::KaplanMeier,
        },
        truncation: args.truncation,
        ..R2Options::default()
    };
    let (train, test) = match args.split {
        Some(fraction) => {
            let (a, b) = split(&ds, fraction, args.seed)?;
            (a, Some(b))
        }
        None => (ds.clone(), None),
    };

    let (beta, report, out_of_sample) = match args.model {
        ModelKind::Additive => {
            let fit = AdditiveFit::fit(&train)?;
            let report = r2_tau(&fit, &train, &options)?;
            let oos = test.as_ref().map(|t| out_of_sample_r2(&fit, t, &options)).transpose()?;
            (fit.beta, report, oos)
        }
        ModelKind::Cox => {
            let fit = fit_cox(&train)?;
            let report = r2_tau(&fit, &train, &options)?;
            let oos = test.as_ref().map(|t| out_of_sample_r2(&fit, t, &options)).transpose()?;
            (fit.beta, report, oos)
        }
    };
    let r2_z_given_t = match (&args.z_given_t, &args.baseline) {
        (true, Some(text)) => {
            let baseline: BaselineHazard = text.parse()?;
            Some(r2_z_given_t(&train, beta[0], baseline)?)
        }
        _ => None,
    };
    let out = R2Output {
        model: args.model,
        covariates: ds.covariate_names(),
        r2: report.r2,
        beta,
        r2_z_given_t,
        report,
        out_of_sample: out_of_sample.map(|r| OutOfSample {
            train_n: train.len(),
            test_n: test.as_ref().map_or(0, SurvivalDataset::len),
            r2_out: r.r2,
            report: r,
        }),
    };
    let seed = args.split.map(|_| args.seed);
    let manifest = Manifest::new("r2", args, vec![Input::of(&args.data.data, &ds)], seed);
    emit_json(&manifest, &out, args.json.as_deref())
}

fn scenario_rows(args: &SimulateArgs) -> Result<Vec<PresetRow>> {
    let mut rows = if PRESET_NAMES.contains(&args.scenario.as_str()) {
        preset(&args.scenario)?
    } else {
        let text = std::fs::read_to_string(&args.scenario).map_err(|source| Error::Io {
            path: args.scenario.clone().into(),
            source,
        })?;
        let mut scenario = Scenario::new(vec![1.0], vec![CovariateLaw::Binary], 1000, 0)?;
        parse_assignments(&mut scenario, &text)?;
        scenario.validate()?;
        vec![PresetRow {
            label: "custom".into(),
            scenario,
            models: Vec::new(),
            cox: false,
            z_given_t: false,
        }]
    };
    if let Some(label) = &args.row {
        rows.retain(|r| &r.label == label);
        if rows.is_empty() {
            return Err(usage(format!("no row '{label}' in scenario {}", args.scenario)));
        }
    }
    for r in &mut rows {
        if let Some(n) = args.n {
            r.scenario.n = n;
        }
        r.cox |= args.cox;
        r.z_given_t |= args.z_given_t;
        if r.models.is_empty() {
            r.models = vec![(0..r.scenario.beta.len()).collect()];
        }
    }
    Ok(rows)
}

fn omega(scenario: &Scenario) -> Result<f64> {
    match (scenario.censoring, scenario.covariates.as_slice()) {
        (Censoring::None, &[law]) => Ok(omega2_analytic(scenario.beta[0], scenario.baseline, law)?),
        _ => Ok(omega2_large_sample(scenario, DEFAULT_LARGE_SAMPLE)?),
    }
}

#[derive(Serialize)]
struct SimulatedRow {
    label: String,
    scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega2: Option<f64>,
    summary: MonteCarloSummary,
}

#[derive(Serialize)]
struct SimulateOutput {
    rows: Vec<SimulatedRow>,
}

fn tau_cell(c: Censoring) -> String {
    match c {
        Censoring::None => "inf".into(),
        Censoring::Uniform { tau } => format!("{tau:.4}"),
    }
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(";")
}

const TABLE_HEADER: [&str; 18] = [
    "label",
    "baseline",
    "beta",
    "covariates",
    "tau",
    "model",
    "censor",
    "censor_sd",
    "beta_hat",
    "beta_hat_sd",
    "r2",
    "r2_sd",
    "r2_cox",
    "r2_cox_sd",
    "r2_z_given_t",
    "r2_z_given_t_sd",
    "omega2",
    "failures",
];

fn table_rows(row: &SimulatedRow) -> Vec<Vec<String>> {
    let s = &row.scenario;
    let full: Vec<usize> = (0..s.beta.len()).collect();
    let opt = |m: Option<f64>| m.map_or(String::new(), |v| format!("{v:.4}"));
    row.summary
        .models
        .iter()
        .map(|m| {
            vec![
                format!("\"{}\"", row.label),
                s.baseline.to_string(),
                join(s.beta.iter().map(|b| b.to_string())),
                join(s.covariates.iter().map(|c| c.to_string())),
                tau_cell(s.censoring),
                join(m.covariates.iter().map(|j| format!("z{}", j + 1))),
                format!("{:.4}", row.summary.censoring.mean),
                format!("{:.4}", row.summary.censoring.sd),
                join(m.beta_hat.iter().map(|b| format!("{:.4}", b.mean))),
                join(m.beta_hat.iter().map(|b| format!("{:.4}", b.sd))),
                format!("{:.4}", m.r2.mean),
                format!("{:.4}", m.r2.sd),
                opt(m.r2_cox.map(|x| x.mean)),
                opt(m.r2_cox.map(|x| x.sd)),
                opt(m.r2_z_given_t.map(|x| x.mean)),
                opt(m.r2_z_given_t.map(|x| x.sd)),
                opt(row.omega2.filter(|_| m.covariates == full)),
                row.summary.failures.to_string(),
            ]
        })
        .collect()
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let rows = scenario_rows(args)?;
    let mut results = Vec::with_capacity(rows.len());
    for r in &rows {
        let seed = args.seed.unwrap_or(r.scenario.seed);
        let mut options = MonteCarloOptions::new(args.reps, seed);
        options.r2 = R2Options::default().with_tolerance(args.tol);
        options.cox = r.cox;
        options.z_given_t = r.z_given_t;
        options.models = r.models.clone();
        log::info!("running {} ({} replicates)", r.label, args.reps);
        let summary = run_monte_carlo(&r.scenario, &options)?;
        let omega2 = if args.omega { Some(omega(&r.scenario)?) } else { None };
        results.push(SimulatedRow {
            label: r.label.clone(),
            scenario: r.scenario.clone(),
            omega2,
            summary,
        });
    }
    if let Some(path) = &args.sample_out {
        let first = &rows[0];
        let ds = replicate_dataset(&first.scenario, args.seed.unwrap_or(first.scenario.seed), 0)?;
        save_csv(&ds, path, "time", "event")?;
    }
    if let Some(path) = &args.out {
        write_table(path, &TABLE_HEADER, results.iter().flat_map(table_rows))?;
    }
    let manifest = Manifest::new("simulate", args, Vec::new(), args.seed);
    emit_json(&manifest, &SimulateOutput { rows: results }, args.json.as_deref())
}

#[derive(Serialize)]
struct DiagnoseOutput<'a> {
    group: &'a str,
    points: usize,
    slope: f64,
    intercept: f64,
    line_r2: f64,
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let column = ds
        .covariate_names()
        .iter()
        .position(|n| n == &args.group)
        .ok_or_else(|| Error::MissingColumn {
            name: args.group.clone(),
        })?;
    let d = cumhaz_difference(&ds, column, args.min_at_risk)?;
    if let Some(path) = &args.out {
        let rows = (0..d.times.len()).map(|k| {
            vec![
                d.times[k].to_string(),
                d.group0[k].to_string(),
                d.group1[k].to_string(),
                d.difference[k].to_string(),
            ]
        });
        write_table(path, &["time", "group0", "group1", "difference"], rows)?;
    }
    let out = DiagnoseOutput {
        group: &args.group,
        points: d.times.len(),
        slope: d.slope,
        intercept: d.intercept,
        line_r2: d.line_r2,
    };
    let manifest = Manifest::new("diagnose", args, vec![Input::of(&args.data.data, &ds)], None);
    emit_json(&manifest, &out, args.json.as_deref())
}

#[derive(Serialize)]
struct SplitOutput {
    train: Input,
    test: Input,
}

pub fn split_command(args: &SplitArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let (train, test) = split(&ds, args.fraction, args.seed)?;
    save_csv(&train, &args.train, &args.data.time, &args.data.event)?;
    save_csv(&test, &args.test, &args.data.time, &args.data.event)?;
    let out = SplitOutput {
        train: Input::of(&args.train, &train),
        test: Input::of(&args.test, &test),
    };
    let manifest = Manifest::new("split", args, vec![Input::of(&args.data.data, &ds)], Some(args.seed));
    emit_json(&manifest, &out, args.json.as_deref())
}
