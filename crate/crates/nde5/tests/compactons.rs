use std::f64::consts::PI;

use nde5::compactons::{
    explicit_compacton, oscillatory_compacton, phi_component, probe_defect, probe_equation, CompactonProfile,
    ExplicitKind, OscillatoryOptions, ProbeEquation, ProbeOptions,
};
use nde5::Error;

#[test]
fn k22_profile_values() {
    let c = explicit_compacton(ExplicitKind::K22);
    assert_eq!(c.support(), (-2.0 * PI, 2.0 * PI));
    assert!((c.f(0.0) - 4.0 / 3.0).abs() < 1e-15);
    assert_eq!(c.f(7.0), 0.0);
    assert!(matches!(phi_component(&c, 1.0), Err(Error::NoOscillation(_))));
}

#[test]
fn first_branch_oscillates_near_interface() {
    let c = oscillatory_compacton(1, None, &OscillatoryOptions::default()).unwrap();
    let o = c.oscillation.as_ref().unwrap();
    assert!((c.y0 - 10.8628546169).abs() < 1e-6, "y0 {}", c.y0);
    assert!(o.sign_changes_near >= 3);
    assert!((o.envelope_exponent - 8.0).abs() < 0.3, "{}", o.envelope_exponent);
    assert_eq!(o.lobes, 1);
    let phi = phi_component(&c, 0.5).unwrap();
    assert!((phi.period - o.phi_period).abs() < 0.05 * o.phi_period, "{} vs {}", phi.period, o.phi_period);
}

#[test]
fn second_branch_has_two_lobes() {
    let c = oscillatory_compacton(2, None, &OscillatoryOptions::default()).unwrap();
    assert!((c.y0 - 14.6719618870).abs() < 1e-6, "y0 {}", c.y0);
    assert_eq!(c.oscillation.as_ref().unwrap().lobes, 2);
    assert!(oscillatory_compacton(3, None, &OscillatoryOptions::default()).is_err());
}

#[test]
fn synthetic_phi_period() {
    let y0 = 5.0;
    let period = 1.7;
    let y: Vec<f64> = (0..20000).map(|i| y0 - (1.6 - 14.0 * i as f64 / 20000.0).exp()).collect();
    let big_f: Vec<f64> = y
        .iter()
        .map(|y| {
            let r: f64 = y0 - y;
            r.powi(8) * (2.0 * PI * r.ln() / period).sin()
        })
        .collect();
    let c = CompactonProfile::from_samples(y, big_f, y0).unwrap();
    let phi = phi_component(&c, 1.0).unwrap();
    assert!((phi.period - period).abs() < 1e-3, "period {}", phi.period);
}

#[test]
fn third_order_contrast_is_solvable_at_two_pi() {
    let opts = ProbeOptions::default();
    let d = probe_defect(ProbeEquation::ThirdOrder, 0.0, 2.0 * PI, &opts).unwrap();
    assert!(d.iter().all(|v| *v < opts.tol), "{d:?}");
}

#[test]
fn generic_quintic_has_no_nonnegative_compacton() {
    let opts = ProbeOptions { points: 24, ..ProbeOptions::default() };
    let r = probe_equation(ProbeEquation::GenericQuintic, 0.0, &opts).unwrap();
    assert!(!r.solvable);
    assert!(r.min_defect > 1e3 * opts.tol, "min defect {}", r.min_defect);
}
