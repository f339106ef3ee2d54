//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//! Reference numbers below are published Monte Carlo means used as anchors.

use std::process::ExitCode;

use addhaz::condsurv::adjust_monotone;
use addhaz::diagnostics::cumhaz_difference;
use addhaz::explained_variation::{base_grid, mixture_marginal_variance, out_of_sample_r2};
use addhaz::simulation::{
    generate_with, omega2_analytic, preset, replicate_dataset, run_monte_carlo, Censoring, CovariateLaw,
    MonteCarloOptions, MonteCarloSummary, PresetRow, Scenario,
};
use addhaz::zgivent::r2_z_given_t;
use addhaz::{freireich, r2_tau, AdditiveFit, BaselineHazard, R2Options};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REPS: usize = 100;
const SEED: u64 = 20240601;

fn options() -> R2Options {
    R2Options::default().with_tolerance(1e-3)
}

fn row(table: &str, label: &str) -> PresetRow {
    preset(table)
        .unwrap()
        .into_iter()
        .find(|r| r.label == label)
        .unwrap_or_else(|| panic!("no row {label} in {table}"))
}

fn simulate(r: &PresetRow) -> Result<MonteCarloSummary, String> {
    let mut o = MonteCarloOptions::new(REPS, SEED);
    o.r2 = options();
    o.models = r.models.clone();
    o.cox = r.cox;
    o.z_given_t = r.z_given_t;
    run_monte_carlo(&r.scenario, &o).map_err(|e| format!("{}: {e}", r.label))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// (label, published mean R², published censoring %)
const TABLE1: [(&str, f64, f64); 6] = [
    ("beta=1,cov=binary,tau=inf", 0.090, 0.0),
    ("beta=3,cov=binary,tau=inf", 0.211, 0.0),
    ("beta=15,cov=binary,tau=inf", 0.308, 0.0),
    ("beta=50,cov=binary,tau=inf", 0.321, 0.0),
    ("beta=3,cov=binary,tau=1.3", 0.158, 38.0),
    ("beta=1,cov=uniform,tau=4.3", 0.067, 14.0),
];

fn criterion1(runs: &[(PresetRow, MonteCarloSummary)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ((r, s), &(_, r2_ref, censor_ref)) in runs.iter().zip(&TABLE1) {
        let b = &s.models[0].beta_hat[0];
        let beta = r.scenario.beta[0];
        let ok_beta = (b.mean - beta).abs() < 3.0 * b.sd / (REPS as f64).sqrt();
        let ok_r2 = (s.models[0].r2.mean - r2_ref).abs() <= 0.02;
        let ok_censor = (100.0 * s.censoring.mean - censor_ref).abs() <= 3.0;
        pass &= ok_beta && ok_r2 && ok_censor && s.failures == 0;
        parts.push(format!(
            "[{}] beta_hat {:.3} ({:.3}) R2 {:.3} vs {r2_ref} censor {:.1}% vs {censor_ref}%",
            r.label,
            b.mean,
            b.sd,
            s.models[0].r2.mean,
            100.0 * s.censoring.mean
        ));
    }
    check(pass, parts.join("; "))
}

fn criterion2(runs: &[(PresetRow, MonteCarloSummary)]) -> Outcome {
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for (r, s) in runs {
        for (index, rep) in s.replicates.iter().enumerate() {
            let Some(rep) = rep else { continue };
            let ds = replicate_dataset(&r.scenario, SEED, index).unwrap();
            let fit = AdditiveFit::fit(&ds).unwrap();
            let outcome = &rep.models[0];
            let mut grid = base_grid(&fit, &options()).unwrap();
            for _ in 0..outcome.refinement_level {
                grid = grid.refine();
            }
            let total = mixture_marginal_variance(&fit, &ds, &grid).unwrap();
            let parts = outcome.components.residual + outcome.components.explained;
            worst = worst.max((total - parts).abs() / total);
            checked += 1;
        }
    }
    check(
        worst < 1e-12 && checked == runs.len() * REPS,
        format!("{checked} datasets, worst relative gap {worst:.2e}"),
    )
}

fn criterion3() -> Outcome {
    let cases = [
        (BaselineHazard::Constant(1.0), CovariateLaw::Binary, 0.333),
        (BaselineHazard::Linear(1.0), CovariateLaw::Binary, 0.647),
        (BaselineHazard::Root(1.0), CovariateLaw::Binary, 0.091),
        (BaselineHazard::Constant(1.0), CovariateLaw::Uniform, 0.500),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (baseline, law, target) in cases {
        let v = omega2_analytic(1e6, baseline, law).unwrap();
        pass &= (v - target).abs() <= 0.01;
        parts.push(format!("{}/{law} {v:.4} vs {target}", baseline.name()));
    }
    check(pass, parts.join("; "))
}

fn criterion4() -> Outcome {
    let values: Vec<f64> = (1..=50)
        .map(|k| omega2_analytic(f64::from(k) / 10.0, BaselineHazard::Constant(1.0), CovariateLaw::Binary).unwrap())
        .collect();
    let min_step = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    check(
        min_step > 0.0,
        format!("50 grid points, smallest increment {min_step:.3e}"),
    )
}

fn criterion5() -> Outcome {
    let r = row("table2", "baseline=const:1");
    let s = match simulate(&r) {
        Ok(s) => s,
        Err(e) => return check(false, e),
    };
    // models: Z1, Z2, Z3, Z4, Z1+Z3, Z1+Z2+Z3, Z1+Z2+Z3+Z4
    let m: Vec<f64> = s.models.iter().map(|m| m.r2.mean).collect();
    let ordered = m[0] < m[4] && m[4] < m[1] && m[1] < m[5] && m[5] <= m[6];
    // the noise covariate Z4 should barely move the full-model mean
    let pass = ordered && (m[5] - 0.122).abs() <= 0.02 && (m[6] - m[5]).abs() <= 0.005;
    check(
        pass,
        format!(
            "Z1 {:.3} < Z1+Z3 {:.3} < Z2 {:.3} < Z1+Z2+Z3 {:.3} (vs 0.122) <= +Z4 {:.3} (gap {:.4})",
            m[0],
            m[4],
            m[1],
            m[5],
            m[6],
            m[6] - m[5]
        ),
    )
}

fn criterion6() -> Outcome {
    // (label, published R²_τ, published R²_cox)
    let rows = [
        ("beta=3,cov=binary,censor=0%", 0.208, 0.208),
        ("beta=3,cov=binary,censor=30%", 0.207, 0.208),
        ("beta=50,cov=binary,censor=0%", 0.329, 0.330),
        ("beta=50,cov=binary,censor=30%", 0.491, 0.493),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, tau_ref, cox_ref) in rows {
        let s = match simulate(&row("table3", label)) {
            Ok(s) => s,
            Err(e) => return check(false, e),
        };
        let a = s.models[0].r2.mean;
        let c = s.models[0].r2_cox.as_ref().unwrap().mean;
        pass &= (a - c).abs() < 0.01 && (a - tau_ref).abs() <= 0.02 && (c - cox_ref).abs() <= 0.02;
        parts.push(format!("[{label}] R2_tau {a:.3} R2_cox {c:.3} vs {tau_ref}/{cox_ref}"));
    }
    check(pass, parts.join("; "))
}

fn criterion7() -> Outcome {
    let targets = [
        (1.0, 0.099),
        (3.0, 0.291),
        (15.0, 0.668),
        (50.0, 0.851),
        (100.0, 0.911),
        (1000.0, 0.988),
    ];
    let mut pass = true;
    let mut means = Vec::new();
    for (beta, target) in targets {
        let s = match simulate(&row("table4", &format!("beta={beta},cov=binary,tau=inf"))) {
            Ok(s) => s,
            Err(e) => return check(false, e),
        };
        let v = s.models[0].r2_z_given_t.as_ref().unwrap().mean;
        pass &= (v - target).abs() <= 0.02;
        means.push(v);
    }
    pass &= means.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = means
        .iter()
        .zip(&targets)
        .map(|(v, (_, t))| format!("{v:.3} vs {t}"))
        .collect();
    check(pass, shown.join(", "))
}

fn criterion8() -> Outcome {
    let ds = freireich();
    let fit = AdditiveFit::fit(&ds).unwrap();
    let r2 = r2_tau(&fit, &ds, &options()).unwrap().r2;
    let line = cumhaz_difference(&ds, 0, 1).unwrap();
    check(
        (r2 - 0.201).abs() <= 0.005 && line.line_r2 > 0.9,
        format!(
            "beta_hat {:.4}, R2 {r2:.3} vs 0.201, line-fit R2 {:.3}",
            fit.beta[0], line.line_r2
        ),
    )
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize) -> addhaz::SurvivalDataset {
    let law = if rng.random::<bool>() {
        CovariateLaw::Binary
    } else {
        CovariateLaw::Uniform
    };
    let mut s = Scenario::new(
        vec![rng.random_range(0.0..10.0), rng.random_range(0.0..3.0)],
        vec![law, CovariateLaw::Uniform],
        n,
        0,
    )
    .unwrap();
    if rng.random::<bool>() {
        s.censoring = Censoring::Uniform {
            tau: rng.random_range(0.5..5.0),
        };
    }
    generate_with(&s, rng).unwrap()
}

fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let fine = R2Options::default().with_tolerance(1e-4);

    let mut fits = 0;
    while fits < 200 {
        let ds = random_dataset(&mut rng, 60);
        let Ok(fit) = AdditiveFit::fit(&ds) else { continue };
        let Ok(report) = r2_tau(&fit, &ds, &R2Options::default()) else {
            continue;
        };
        fits += 1;
        if !(0.0..=1.0).contains(&report.r2) {
            failures.push(format!("R2 {} outside [0,1]", report.r2));
        }
    }

    let (mut affine, mut rescale, mut oos) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..30 {
        let ds = random_dataset(&mut rng, 80);
        let fit = AdditiveFit::fit(&ds).unwrap();
        let base = r2_tau(&fit, &ds, &fine).unwrap().r2;
        let moved = ds
            .map_covariates(|z| vec![-2.0 * z[0] + 3.0, z[1] + 0.5 * z[0]])
            .unwrap();
        affine = affine.max((r2_tau(&AdditiveFit::fit(&moved).unwrap(), &moved, &fine).unwrap().r2 - base).abs());
        let stretched = ds.rescale_times(2.5).unwrap();
        let o = fine.clone().with_capped_spacing(0.0);
        let r = r2_tau(&AdditiveFit::fit(&stretched).unwrap(), &stretched, &o)
            .unwrap()
            .r2;
        rescale = rescale.max((r - base).abs());
        oos = oos.max((out_of_sample_r2(&fit, &ds, &fine).unwrap().r2 - base).abs());
    }
    if affine >= 1e-6 {
        failures.push(format!("affine gap {affine:.1e}"));
    }
    if rescale >= 2e-3 {
        failures.push(format!("time-rescaling gap {rescale:.1e}"));
    }
    if oos != 0.0 {
        failures.push(format!("out-of-sample on training data differs by {oos:.1e}"));
    }

    for _ in 0..20 {
        let ds = random_dataset(&mut rng, 50);
        let scalar = ds.select_covariates(&[1]).unwrap();
        let zero = AdditiveFit::with_beta(&scalar, vec![0.0]).unwrap();
        let r = r2_tau(&zero, &scalar, &R2Options::default()).unwrap().r2;
        let z = r2_z_given_t(&scalar, 0.0, BaselineHazard::Constant(1.0)).unwrap();
        if r != 0.0 || z != 0.0 {
            failures.push(format!("zero coefficient gave R2 {r}, R2_Z|T {z}"));
        }
    }

    for _ in 0..100 {
        let len = rng.random_range(1..50);
        let grid: Vec<f64> = (0..len).map(|i| i as f64 * 0.1).collect();
        let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.2)).collect();
        let once = adjust_monotone(&grid, &raw);
        if adjust_monotone(&grid, &once.values).values != once.values {
            failures.push("adjust_monotone not idempotent".into());
        }
    }

    let n = 100_000;
    for baseline in [
        BaselineHazard::Constant(1.0),
        BaselineHazard::Linear(1.0),
        BaselineHazard::Root(1.0),
    ] {
        let mut s = Scenario::new(vec![2.0], vec![CovariateLaw::Uniform], n, 0).unwrap();
        s.baseline = baseline;
        let ds = generate_with(&s, &mut rng).unwrap();
        let mut u: Vec<f64> = (0..n)
            .map(|i| {
                let t = ds.times()[i];
                (-baseline.cumulative(t) - 2.0 * ds.z(i)[0] * t).exp()
            })
            .collect();
        u.sort_by(f64::total_cmp);
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - v))
            .fold(0.0, f64::max);
        if d >= 1.628 / (n as f64).sqrt() {
            failures.push(format!("{baseline} KS D = {d:.4}"));
        }
    }

    let detail =
        format!("200 fits in [0,1]; affine gap {affine:.1e}; rescale gap {rescale:.1e}; out-of-sample gap {oos:.1e}");
    if failures.is_empty() {
        check(true, detail)
    } else {
        check(false, format!("{detail}; {}", failures.join("; ")))
    }
}

fn main() -> ExitCode {
    let table1: Result<Vec<(PresetRow, MonteCarloSummary)>, String> = TABLE1
        .iter()
        .map(|&(label, _, _)| {
            let r = row("table1", label);
            simulate(&r).map(|s| (r, s))
        })
        .collect();
    let (c1, c2) = match &table1 {
        Ok(runs) => (criterion1(runs), criterion2(runs)),
        Err(e) => (check(false, e.clone()), check(false, "no fitted datasets".into())),
    };

    let outcomes = [
        ("1 single-covariate simulation rows", c1),
        ("2 decomposition identity", c2),
        ("3 limit constants", criterion3()),
        ("4 monotonicity in beta", criterion4()),
        ("5 nested-model ordering", criterion5()),
        ("6 Cox agreement", criterion6()),
        ("7 Z|T measure", criterion7()),
        ("8 Freireich data", criterion8()),
        ("9 property suite", criterion9()),
    ];
    let mut all = true;
    for (name, o) in &outcomes {
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        all &= o.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
