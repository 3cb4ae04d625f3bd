use num_complex::Complex64;

use nde5::asymptotics::{char_exponents, fit_oscillatory_samples, BundleContext};
use nde5::SimilarityParams;

fn matches(roots: &[Complex64], expected: &[Complex64], tol: f64) -> bool {
    roots.len() == expected.len() && expected.iter().all(|e| roots.iter().any(|r| (r - e).norm() < tol))
}

fn alpha_grid() -> Vec<f64> {
    (1..=50).map(|i| 0.25 * i as f64 / 51.0).collect()
}

#[test]
fn compacton_interface_roots() {
    let rep = char_exponents(BundleContext::CompactonInterface, &SimilarityParams::riemann()).unwrap();
    let s = 111f64.sqrt() / 2.0;
    let expected = [Complex64::new(-4.0, 0.0), Complex64::new(7.0, 0.0), Complex64::new(1.5, s), Complex64::new(1.5, -s)];
    assert!(matches(&rep.roots, &expected, 1e-10), "{:?}", rep.roots);
    assert_eq!(rep.bundle_dimension, 1);
}

#[test]
fn shock_quintic_roots() {
    let rep = char_exponents(BundleContext::ShockQuinticEuler, &SimilarityParams::riemann()).unwrap();
    let s = 15f64.sqrt() / 2.0;
    let expected = [Complex64::new(0.0, 0.0), Complex64::new(5.0, 0.0), Complex64::new(2.5, s), Complex64::new(2.5, -s)];
    assert!(matches(&rep.roots, &expected, 1e-10), "{:?}", rep.roots);
}

#[test]
fn wkbj_admissible_counts_over_alpha() {
    for alpha in alpha_grid() {
        let p = SimilarityParams::new(alpha, 1.0).unwrap();
        let b = char_exponents(BundleContext::WkbjBlowupTail, &p).unwrap();
        let g = char_exponents(BundleContext::WkbjGlobalTail, &p).unwrap();
        assert_eq!(b.admissible_roots.len(), 3, "alpha {alpha}");
        assert_eq!(g.admissible_roots.len(), 2, "alpha {alpha}");
        assert_eq!(b.bundle_dimension, 4);
        assert_eq!(g.bundle_dimension, 3);
    }
}

#[test]
fn equilibrium_frequency() {
    let rep = char_exponents(BundleContext::WkbjEquilibrium, &SimilarityParams::riemann()).unwrap();
    assert!((rep.metrics["a0"] - 0.534992).abs() < 1e-6);
    assert!(rep.admissible_roots.iter().all(|z| (z.norm() - rep.metrics["a0"]).abs() < 1e-12));
}

#[test]
fn euler_negative_root_count_is_stable() {
    for alpha in alpha_grid() {
        let p = SimilarityParams::new(alpha, 1.0).unwrap();
        let rep = char_exponents(BundleContext::QuinticGrowthEuler, &p).unwrap();
        let sturm = rep.metrics["negative_real_roots"] as usize;
        let counted = |tol: f64| rep.roots.iter().filter(|z| z.re < 0.0 && z.im.abs() <= tol * z.norm()).count();
        assert_eq!(counted(1e-8), sturm, "alpha {alpha}");
        assert_eq!(counted(1e-12), sturm, "alpha {alpha}");
        assert!((rep.metrics["h_at_minus_5"] - (1.0 + 2.0 * alpha)).abs() < 1e-12);
    }
}

#[test]
fn vanishing_bundle_dimension() {
    let rep = char_exponents(BundleContext::VanishingSqrt, &SimilarityParams::new(1.0 / 9.0, 1.0).unwrap()).unwrap();
    assert_eq!(rep.bundle_dimension, 4);
}

#[test]
fn tail_fit_recovers_synthetic_parameters() {
    let a0 = 0.534992;
    let z: Vec<f64> = (0..3000).map(|i| -40.0 - 140.0 * i as f64 / 2999.0).collect();
    let g: Vec<f64> = z
        .iter()
        .map(|z| {
            let x = z.abs();
            1.0 + 0.7 * x.powf(-0.625) * (a0 * x.powf(1.25) + 0.3).sin()
        })
        .collect();
    let fit = fit_oscillatory_samples(&z, &g, None).unwrap();
    assert!((fit.envelope_exponent + 0.625).abs() < 1e-6, "{fit:?}");
    assert!((fit.phase_exponent - 1.25).abs() < 1e-6, "{fit:?}");
    assert!((fit.a0 - a0).abs() < 1e-6, "{fit:?}");
    assert!((fit.level - 1.0).abs() < 1e-8, "{fit:?}");
}
