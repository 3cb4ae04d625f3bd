use nde5::analysis::{
    delta_entropy_test, fit_power, flux_third, l1_rate, rh_speed, tv_growth, ExtendedProfile, JumpJets, ShockSide,
    Verdict, Window,
};
use nde5::asymptotics::fit_oscillatory_tail;
use nde5::parallel::Exec;
use nde5::shooting::{polish_shock, ShootOptions};
use nde5::NdeKind;
use proptest::prelude::*;

fn n50_extended() -> ExtendedProfile {
    let s = polish_shock(NdeKind::N50, (-1.0, 1.0), 100.0, 1000, ShootOptions::default()).unwrap();
    let fit = fit_oscillatory_tail(&s.bvp.profile, (-90.0, -40.0), None).unwrap();
    ExtendedProfile::new(&s.bvp.profile, Some(fit.into()), Some(-90.0)).unwrap()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

#[test]
fn rates_on_the_n50_shock() {
    let ext = n50_extended();
    let ts: Vec<f64> = logspace(-20.0, -30.0, 9).into_iter().map(|t| -t).collect();
    let l1 = l1_rate(&ext, 1.0, &ts).unwrap();
    assert!((l1.exponent - 0.125).abs() < 0.02, "l1 exponent {}", l1.exponent);
    let tv = tv_growth(&ext, &logspace(2.0, 4.0, 9)).unwrap();
    assert!((tv.exponent - 0.625).abs() < 0.05, "tv exponent {}", tv.exponent);
}

#[test]
fn entropy_verdicts_stable_under_halving() {
    let ext = n50_extended();
    let full = logspace(-6.0, -2.0, 9);
    let half: Vec<f64> = full.iter().step_by(2).copied().collect();
    for deltas in [&full, &half] {
        let m = delta_entropy_test(ShockSide::SMinusBlowup, &ext, deltas, Window::default(), Exec::default()).unwrap();
        let p = delta_entropy_test(ShockSide::SPlusRiemann, &ext, deltas, Window::default(), Exec::default()).unwrap();
        assert_eq!(m.verdict, Verdict::Entropy, "{m:?}");
        assert_eq!(p.verdict, Verdict::NonEntropy, "{p:?}");
    }
}

#[test]
fn power_fit_on_exact_law() {
    let xs = logspace(0.0, 3.0, 7);
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.4)).collect();
    let r = fit_power("test", &xs, &ys).unwrap();
    assert!((r.exponent - 0.4).abs() < 1e-12);
}

#[test]
fn antisymmetric_jump_is_stationary() {
    let (lambda, bracket) = rh_speed(&JumpJets { minus: [1.0, 0.0, 0.0, 0.0, 0.0], plus: [-1.0, 0.0, 0.0, 0.0, 0.0] }).unwrap();
    assert_eq!(lambda, 0.0);
    assert_eq!(bracket, 0.0);
    assert!(rh_speed(&JumpJets { minus: [1.0; 5], plus: [1.0; 5] }).is_err());
}

/// Taylor coefficients of a product truncated at degree 5.
fn product(a: &[i64; 6], b: &[i64; 6]) -> [i64; 6] {
    let mut c = [0; 6];
    for i in 0..6 {
        for j in 0..6 - i {
            c[i + j] += a[i] * b[j];
        }
    }
    c
}

proptest! {
    #[test]
    fn flux_is_third_derivative_of_product(d in proptest::array::uniform5(-50i64..50)) {
        // F with F^(k)(0) = d_k; coefficients scaled by 4! so every Taylor coefficient is an integer
        let fact = [1, 1, 2, 6, 24];
        let f: [i64; 6] = std::array::from_fn(|k| if k < 5 { d[k] * 24 / fact[k] } else { 0 });
        let df: [i64; 6] = std::array::from_fn(|k| if k < 5 { f[k + 1] * (k as i64 + 1) } else { 0 });
        let ff1 = product(&f, &df);
        let third = ff1[3] * 6;
        let jet = d.map(|v| v as f64);
        prop_assert_eq!(flux_third(&jet) * 576.0, third as f64);
    }

    #[test]
    fn integer_jets_give_exact_speed(m in proptest::array::uniform5(-20i64..20), p in proptest::array::uniform5(-20i64..20)) {
        prop_assume!(m[0] != p[0]);
        let fl = |j: &[i64; 5]| j[0] * j[4] + 4 * j[1] * j[3] + 3 * j[2] * j[2];
        let bracket = fl(&p) - fl(&m);
        let jump = p[0] - m[0];
        let (lambda, b) = rh_speed(&JumpJets { minus: m.map(|v| v as f64), plus: p.map(|v| v as f64) }).unwrap();
        prop_assert_eq!(b, bracket as f64);
        prop_assert_eq!(lambda, bracket as f64 / jump as f64);
    }

    #[test]
    fn reflected_jets_are_stationary(j in proptest::array::uniform5(-1e3f64..1e3)) {
        prop_assume!(j[0] != 0.0);
        let neg = j.map(|v| -v);
        let (lambda, _) = rh_speed(&JumpJets { minus: j, plus: neg }).unwrap();
        prop_assert_eq!(lambda, 0.0);
    }
}
