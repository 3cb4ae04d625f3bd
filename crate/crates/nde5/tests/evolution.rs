use std::f64::consts::PI;

use nde5::evolution::{
    evolve, mollify, shock_indicator, stable_step, EvolutionField, EvolveOptions, FieldTemplate, StepData,
};
use nde5::{Error, NdeKind};

fn max_grad(f: &EvolutionField) -> f64 {
    f.derivative(1).iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn smooth_bump(l: f64, n: usize, amp: f64) -> EvolutionField {
    EvolutionField::from_fn(l, n, |x| amp * (-(x / 5.0).powi(2)).exp() + 0.3 * amp * (2.0 * PI * x / l).sin())
        .unwrap()
}

#[test]
fn linear_mode_phase() {
    let l = 16.0 * PI;
    let eps = 1e-6;
    let u0 = EvolutionField::from_fn(l, 64, |x| eps * x.sin()).unwrap();
    let out = evolve(&u0, NdeKind::UniformNonDiv, 0.1, None, EvolveOptions::default()).unwrap();
    let u = out.last().unwrap();
    let err = (0..u.n()).map(|i| (u.values[i] - eps * (u.x(i) - 0.1).sin()).abs()).fold(0.0, f64::max);
    assert!(err / eps < 1e-8, "relative error {err:e}");
}

#[test]
fn divergence_form_conserves_mass() {
    let u0 = smooth_bump(50.0, 256, 0.8);
    let dt = stable_step(&u0, 1.0);
    let out = evolve(&u0, NdeKind::UniformDiv, 1000.0 * dt, Some(dt), EvolveOptions::default()).unwrap();
    let drift = (out[1].mass() - u0.mass()).abs();
    assert!(drift < 1e-10, "mass drift {drift:e}");
}

#[test]
fn mollified_step_gradient_decreases() {
    let m = mollify(&StepData::SPlus, 3.0, FieldTemplate::default()).unwrap();
    let out = evolve(&m.field, NdeKind::UniformNonDiv, 0.1, None, EvolveOptions { cfl: 1.0, snapshots: 4 }).unwrap();
    let g: Vec<f64> = out.iter().map(max_grad).collect();
    assert!(g.windows(2).all(|w| w[1] < w[0]), "gradients {g:?}");
}

#[test]
fn fourth_order_in_time() {
    let u0 = smooth_bump(8.0 * PI, 64, 1.0);
    let dt = stable_step(&u0, 1.0);
    let run = |h: f64| evolve(&u0, NdeKind::UniformNonDiv, 0.5, Some(h), EvolveOptions::default()).unwrap()[1].clone();
    let a = run(dt);
    let b = run(dt / 2.0);
    let c = run(dt / 4.0);
    let diff = |p: &EvolutionField, q: &EvolutionField| {
        p.values.iter().zip(&q.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let slope = (diff(&a, &b) / diff(&b, &c)).log2();
    println!("slope {slope} e1 {:e} e2 {:e}", diff(&a, &b), diff(&b, &c));
    assert!((slope - 4.0).abs() < 0.5, "slope {slope}");
}

#[test]
fn reality_preserved() {
    let u0 = smooth_bump(50.0, 256, 1.0);
    let out = evolve(&u0, NdeKind::UniformNonDiv, 0.05, None, EvolveOptions { cfl: 1.0, snapshots: 3 }).unwrap();
    for s in &out {
        assert!(s.imag_residue < 1e-12, "imaginary residue {:e}", s.imag_residue);
    }
}

#[test]
fn space_time_reflection_reverses_evolution() {
    let u0 = smooth_bump(8.0 * PI, 64, 0.1);
    let n = u0.n();
    let reflect = |f: &EvolutionField| -> Vec<f64> { (0..n).map(|i| f.values[(n - i) % n]).collect() };
    let t = 0.5;
    let dt = 0.9 * stable_step(&u0, 1.0);
    let fwd = evolve(&u0, NdeKind::UniformNonDiv, t, Some(dt), EvolveOptions::default()).unwrap()[1].clone();
    let back0 = EvolutionField::new(u0.half_length, reflect(&fwd), 0.0).unwrap();
    let back = evolve(&back0, NdeKind::UniformNonDiv, t, Some(dt), EvolveOptions::default()).unwrap()[1].clone();
    let target = reflect(&u0);
    let err = back.values.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let half = evolve(&u0, NdeKind::UniformNonDiv, t, Some(dt / 2.0), EvolveOptions::default()).unwrap()[1].clone();
    let scheme = fwd.values.iter().zip(&half.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("reflection error {err:e}, scheme error {scheme:e}");
    assert!(err <= 10.0 * scheme.max(1e-12), "reflection error {err:e}, scheme error {scheme:e}");
}

#[test]
fn indicator_cases() {
    let zero = EvolutionField::from_fn(8.0 * PI, 64, |_| 0.0).unwrap();
    assert_eq!(shock_indicator(&zero).max_gradient, 0.0);
    let sine = EvolutionField::from_fn(8.0 * PI, 64, f64::sin).unwrap();
    assert!((shock_indicator(&sine).max_gradient - 1.0).abs() < 1e-12);
    let m = mollify(&StepData::SPlus, 1e-2, FieldTemplate::default()).unwrap();
    let ind = shock_indicator(&m.field);
    let l = 50.0;
    assert!(ind.distance_s_plus < 1e-2, "{ind:?}");
    assert!((ind.distance_s_minus / (4.0 * l) - 1.0).abs() < 0.2, "{ind:?}");
}

#[test]
fn mollifier_distances() {
    let mut last = f64::INFINITY;
    for delta in [1.0, 1e-1, 1e-2, 1e-3] {
        let m = mollify(&StepData::SPlus, delta, FieldTemplate::default()).unwrap();
        assert!(m.distance >= delta / 2.0 && m.distance <= delta, "{delta} {}", m.distance);
        assert!(m.field.max_abs() <= 1.0 + 1e-12);
        assert!(m.distance < last);
        last = m.distance;
    }
    let s = mollify(&StepData::SMinus, 1e-2, FieldTemplate::default()).unwrap();
    assert!(s.field.values[10] > 0.0);
    assert!(mollify(&StepData::SPlus, 6.0, FieldTemplate::default()).is_err());
}

#[test]
fn smooth_samples_abandoned() {
    let f = EvolutionField::from_fn(50.0, 256, |x| (-(x / 4.0).powi(2)).exp()).unwrap();
    let m = mollify(&StepData::Custom(f.values.clone()), 1e-2, FieldTemplate::default()).unwrap();
    assert!(m.abandoned);
    assert_eq!(m.field.values, f.values);
    let rough: Vec<f64> = (0..256).map(|i| if (64..192).contains(&i) { 1.0 } else { 0.0 }).collect();
    let m = mollify(&StepData::Custom(rough), 1.0, FieldTemplate::default()).unwrap();
    assert!(!m.abandoned && m.distance <= 1.0 && m.distance >= 0.5, "{}", m.distance);
}

#[test]
fn rough_data_and_large_steps_rejected() {
    let m = mollify(&StepData::SPlus, 1e-2, FieldTemplate::default()).unwrap();
    assert!(matches!(evolve(&m.field, NdeKind::UniformNonDiv, 0.1, None, EvolveOptions::default()), Err(Error::InvalidInput(_))));
    let u0 = smooth_bump(50.0, 256, 1.0);
    let dt = stable_step(&u0, 1.0);
    assert!(evolve(&u0, NdeKind::UniformNonDiv, 0.1, Some(2.0 * dt), EvolveOptions::default()).is_err());
    assert!(evolve(&u0, NdeKind::N50, 0.1, None, EvolveOptions::default()).is_err());
}

#[test]
fn steep_data_halts() {
    let m = mollify(&StepData::SPlus, 3.0, FieldTemplate::default()).unwrap();
    let r = evolve(&m.field, NdeKind::UniformNonDiv, 0.5, None, EvolveOptions::default());
    assert!(r.is_ok() || matches!(r, Err(Error::BlowupDetected(_)) | Err(Error::SpectralTailRise { .. })));
}
