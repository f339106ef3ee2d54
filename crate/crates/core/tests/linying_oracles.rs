use addhaz::dataset::{failure_grid, SurvivalDataset};
use addhaz::linying::{eval_baseline, fit_beta, risk_set_mean, AdditiveFit};
use addhaz::simulation::{generate, CovariateLaw, Scenario};
use addhaz::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(n: usize, p: usize, seed: u64) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = (0..n).map(|_| (rng.random::<f64>() * 20.0).ceil() / 4.0).collect();
    let events = (0..n).map(|i| i == 0 || rng.random::<f64>() < 0.7).collect();
    let rows = (0..n)
        .map(|_| (0..p).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect())
        .collect();
    SurvivalDataset::new(times, events, rows, (0..p).map(|j| format!("z{j}")).collect()).unwrap()
}

/// Direct evaluation of the estimating equations: every subject, every
/// interval between observed times, risk-set means recomputed from scratch.
fn brute_force_beta(ds: &SurvivalDataset) -> Vec<f64> {
    let n = ds.len();
    let p = ds.dim();
    let zbar = |t: f64| -> Vec<f64> {
        let at_risk: Vec<usize> = (0..n).filter(|&j| ds.times()[j] >= t).collect();
        (0..p)
            .map(|c| at_risk.iter().map(|&j| ds.z(j)[c]).sum::<f64>() / at_risk.len() as f64)
            .collect()
    };
    let mut cuts: Vec<f64> = ds.times().to_vec();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let zb = zbar(hi);
        for i in 0..n {
            if ds.times()[i] >= hi {
                let d = DVector::from_iterator(p, ds.z(i).iter().zip(&zb).map(|(z, m)| z - m));
                a += (hi - lo) * &d * d.transpose();
            }
        }
    }
    let mut b = DVector::<f64>::zeros(p);
    for i in 0..n {
        if ds.events()[i] {
            let zb = zbar(ds.times()[i]);
            for c in 0..p {
                b[c] += ds.z(i)[c] - zb[c];
            }
        }
    }
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

#[test]
fn beta_matches_brute_force() {
    for (n, p, seed) in [(5, 1, 1), (12, 2, 2), (40, 3, 3), (60, 1, 4), (80, 2, 5)] {
        let ds = random_dataset(n, p, seed);
        let fast = fit_beta(&ds).unwrap();
        let slow = brute_force_beta(&ds);
        for (f, s) in fast.iter().zip(&slow) {
            assert!(
                (f - s).abs() <= 1e-9 * (1.0 + s.abs()),
                "n={n} p={p}: {fast:?} vs {slow:?}"
            );
        }
    }
}

#[test]
fn risk_set_mean_matches_loop() {
    let ds = random_dataset(50, 2, 9);
    for &t in &[0.0, 0.3, 1.0, 2.5, 4.0] {
        let m = risk_set_mean(&ds, t).unwrap();
        let idx: Vec<usize> = (0..50).filter(|&i| ds.times()[i] >= t).collect();
        for (c, &mc) in m.iter().enumerate() {
            let direct = idx.iter().map(|&i| ds.z(i)[c]).sum::<f64>() / idx.len() as f64;
            assert!((mc - direct).abs() < 1e-14);
        }
    }
    let two = SurvivalDataset::new(
        vec![1.0, 2.0],
        vec![true, true],
        vec![vec![0.0], vec![1.0]],
        vec!["z".into()],
    )
    .unwrap();
    assert_eq!(risk_set_mean(&two, 0.5).unwrap(), vec![0.5]);
    let err = risk_set_mean(&two, 3.0).unwrap_err();
    assert!(err.to_string().starts_with("empty risk set"), "{err}");
}

#[test]
fn constant_covariate_is_degenerate() {
    let ds = SurvivalDataset::new(
        vec![1.0, 2.0, 3.0],
        vec![true, true, true],
        vec![vec![2.0], vec![2.0], vec![2.0]],
        vec!["z".into()],
    )
    .unwrap();
    let err = fit_beta(&ds).unwrap_err();
    assert!(matches!(err, Error::DesignDegenerate { .. }));
    assert!(err.to_string().starts_with("design degenerate"));
}

#[test]
fn zero_beta_gives_nelson_aalen() {
    let ds = random_dataset(30, 2, 11);
    let fit = AdditiveFit::with_beta(&ds, vec![0.0, 0.0]).unwrap();
    let grid = failure_grid(&ds).unwrap();
    let mut na = 0.0;
    for (k, &t) in grid.times.iter().enumerate() {
        na += grid.event_counts[k] as f64 / grid.risk_counts[k] as f64;
        assert_eq!(eval_baseline(&fit.baseline, t).unwrap(), na);
        // flat between failure times
        if k + 1 < grid.len() {
            let mid = 0.5 * (t + grid.times[k + 1]);
            assert_eq!(eval_baseline(&fit.baseline, mid).unwrap(), na);
        }
    }
}

#[test]
fn between_knots_follows_drift() {
    let ds = random_dataset(25, 1, 13);
    let fit = AdditiveFit::fit(&ds).unwrap();
    let b = &fit.baseline;
    for k in 0..b.segment_slopes.len() {
        let (t0, t1) = (b.knot_times[k], b.knot_times[k + 1]);
        let zb = risk_set_mean(&ds, t1).unwrap()[0];
        assert!((b.segment_slopes[k] + fit.beta[0] * zb).abs() < 1e-12);
        let mid = 0.5 * (t0 + t1);
        let expected = b.knot_values[k] - fit.beta[0] * zb * (mid - t0);
        assert!((eval_baseline(b, mid).unwrap() - expected).abs() < 1e-12);
        assert_eq!(eval_baseline(b, t1).unwrap(), b.knot_values[k + 1]);
    }
    assert_eq!(eval_baseline(b, 0.0).unwrap(), 0.0);
    assert!(eval_baseline(b, b.max_time() * 1.01).is_err());
}

// At n = 1000 the Nelson–Aalen noise near the 95% event quantile alone has
// SD ≈ 0.13, so the 0.1 band is checked at a size where it measures bias.
#[test]
fn large_sample_baseline_is_linear() {
    let s = Scenario::new(vec![3.0], vec![CovariateLaw::Binary], 20_000, 5).unwrap();
    let ds = generate(&s).unwrap();
    let fit = AdditiveFit::fit(&ds).unwrap();
    let grid = failure_grid(&ds).unwrap();
    let k = grid.len();
    let mut worst = 0.0_f64;
    for &t in &grid.times[k / 20..k - k / 20] {
        worst = worst.max((eval_baseline(&fit.baseline, t).unwrap() - t).abs());
    }
    assert!(worst < 0.1, "max deviation {worst}");
}

#[test]
fn scaling_laws() {
    let ds = random_dataset(40, 2, 17);
    let beta = fit_beta(&ds).unwrap();
    let shifted = ds
        .map_covariates(|z| z.iter().map(|v| 2.0 * v - 1.0).collect())
        .unwrap();
    let shifted_beta = fit_beta(&shifted).unwrap();
    for (a, b) in beta.iter().zip(&shifted_beta) {
        assert!((a / 2.0 - b).abs() < 1e-10 * (1.0 + a.abs()));
    }
    let slow = ds.rescale_times(3.0).unwrap();
    for (a, b) in beta.iter().zip(&fit_beta(&slow).unwrap()) {
        assert!((a / 3.0 - b).abs() < 1e-10 * (1.0 + a.abs()));
    }
}
