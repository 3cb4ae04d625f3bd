use nde5::parallel::Exec;
use nde5::shooting::{
    antisymmetric_extension, classify_shock_launch, polish_shock, shoot_blowup, shoot_shock, shoot_time5, sweep_family,
    ShootOptions, TailClass, Time5Options,
};
use nde5::{Error, NdeKind, SimilarityParams};

#[test]
fn n50_shooting_constant() {
    let r = shoot_shock(NdeKind::N50, (-1.0, 1.0), 1e-10, ShootOptions::default()).unwrap();
    assert!((r.value - 0.069192424).abs() < 5e-3, "D0 = {}", r.value);
    assert!((r.value - 0.0692915).abs() < 1e-6, "D0 = {}", r.value);
    assert!(r.trusted_extent > 10.0);
}

#[test]
fn launch_classes_straddle_d0() {
    let opts = ShootOptions::default();
    let lo = classify_shock_launch(NdeKind::N50, 0.05, opts).unwrap();
    let hi = classify_shock_launch(NdeKind::N50, 0.09, opts).unwrap();
    assert_ne!(std::mem::discriminant(&lo.class), std::mem::discriminant(&hi.class));
    assert!(matches!(lo.class, TailClass::QuinticGrowth | TailClass::SignChange { .. }));
}

#[test]
fn every_shock_kind_has_a_constant() {
    for kind in NdeKind::SHOCK_KINDS {
        let r = shoot_shock(kind, (-1.0, 1.0), 1e-8, ShootOptions::default()).unwrap();
        assert!(r.value > 0.0 && r.value < 1.0, "{kind}: {}", r.value);
    }
}

#[test]
fn blowup_shooting_value() {
    let p = SimilarityParams::new(1.0 / 9.0, 1.0).unwrap();
    let r = shoot_blowup(p, 0.0, -1.0, (0.0, 0.2), 1e-10, ShootOptions::default()).unwrap();
    assert!((r.value - 0.0718040128557).abs() < 1e-3, "f3 = {}", r.value);
}

#[test]
fn blowup_positive_slope_has_no_bracket() {
    let p = SimilarityParams::new(1.0 / 9.0, 1.0).unwrap();
    let r = shoot_blowup(p, 0.0, 1.0, (0.0, 0.2), 1e-10, ShootOptions::default());
    assert!(matches!(r, Err(Error::SameClassAtBracket(_))), "{r:?}");
}

#[test]
fn polished_profile_agrees_with_shooting() {
    let s = polish_shock(NdeKind::N50, (-1.0, 1.0), 100.0, 1000, ShootOptions::default()).unwrap();
    let diff = (0..=1000)
        .map(|i| -10.0 * i as f64 / 1000.0)
        .map(|z| (s.shooting.profile.eval(z).unwrap()[0] - s.bvp.profile.eval(z).unwrap()[0]).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-3, "sup difference {diff:e}");
    let d = s.bvp.profile.eval(0.0).unwrap()[3] / 6.0;
    assert!((d - s.shooting.value).abs() < 1e-5);
}

#[test]
fn antisymmetric_extension_is_odd() {
    let r = shoot_shock(NdeKind::N50, (-1.0, 1.0), 1e-8, ShootOptions::default()).unwrap();
    let full = antisymmetric_extension(&r.profile).unwrap();
    for z in [0.5, 1.0, 3.0, 7.0] {
        let (a, b) = (full.eval(z).unwrap(), full.eval(-z).unwrap());
        assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
}

#[test]
fn time5_profile_levels_off() {
    let prof = shoot_time5(1.0, 0.0, Time5Options::default()).unwrap();
    let far = prof.jets[0][0];
    let mid = prof.eval(-100.0).unwrap()[0];
    assert!((far - 1.136747672).abs() < 1e-6, "{far}");
    assert!((far - mid).abs() < 1e-3);
}

#[test]
fn sweeps_match_across_modes() {
    let grid: Vec<f64> = (0..8).map(|i| 0.03 + 0.01 * i as f64).collect();
    let solve = |d: &f64| classify_shock_launch(NdeKind::N50, *d, ShootOptions::default()).map(|c| c.class);
    let a: Vec<_> = sweep_family(Exec::Sequential, &grid, solve).into_iter().map(|(d, r)| (d, r.unwrap())).collect();
    let b: Vec<_> = sweep_family(Exec::Parallel, &grid, solve).into_iter().map(|(d, r)| (d, r.unwrap())).collect();
    assert_eq!(a, b);
}
