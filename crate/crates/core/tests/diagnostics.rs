use addhaz::dataset::{freireich, SurvivalDataset};
use addhaz::diagnostics::cumhaz_difference;
use addhaz::simulation::{generate, CovariateLaw, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn additive_data_has_slope_beta() {
    let ds = generate(&Scenario::new(vec![3.0], vec![CovariateLaw::Binary], 1000, 51).unwrap()).unwrap();
    let d = cumhaz_difference(&ds, 0, 1).unwrap();
    assert!((d.slope - 3.0).abs() < 0.3, "{}", d.slope);
    assert!(d.group0.windows(2).all(|w| w[1] >= w[0]));
    assert!(d.group1.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn proportional_data_bends() {
    // λ(t|Z) = t·e^{2Z}: Λ(t|Z) = e^{2Z} t²/2, so the difference is quadratic.
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let n = 1000;
    let z: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
    let times = z
        .iter()
        .map(|&zi| {
            let e = -(1.0 - rng.random::<f64>()).ln();
            (2.0 * e / (2.0 * zi).exp()).sqrt()
        })
        .collect();
    let ds = SurvivalDataset::new(
        times,
        vec![true; n],
        z.iter().map(|&v| vec![v]).collect(),
        vec!["g".into()],
    )
    .unwrap();
    let d = cumhaz_difference(&ds, 0, 1).unwrap();
    assert!(d.line_r2 < 0.99, "{}", d.line_r2);
}

#[test]
fn swapping_labels_negates() {
    let ds = generate(&Scenario::new(vec![1.0], vec![CovariateLaw::Binary], 300, 53).unwrap()).unwrap();
    let swapped = ds.map_covariates(|z| vec![1.0 - z[0]]).unwrap();
    let a = cumhaz_difference(&ds, 0, 1).unwrap();
    let b = cumhaz_difference(&swapped, 0, 1).unwrap();
    assert_eq!(a.times, b.times);
    for (x, y) in a.difference.iter().zip(&b.difference) {
        assert_eq!(*x, -*y);
    }
}

#[test]
fn freireich_difference_is_linear() {
    let d = cumhaz_difference(&freireich(), 0, 1).unwrap();
    assert!(d.line_r2 > 0.9, "{}", d.line_r2);
    assert!(d.slope < 0.0);
}
