use nde5::analysis::closed_form_residual;
use nde5::compactons::ExplicitKind;
use nde5::models::rhs_blowup;
use nde5::SimilarityParams;
use proptest::prelude::*;

const C5: f64 = 24.0 / 362880.0;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `f = Cy − (4!/9!)y⁵` and its derivatives.
fn critical_poly(c: f64) -> impl Fn(f64) -> [f64; 6] {
    move |y| {
        [
            c * y - C5 * y.powi(5),
            c - 5.0 * C5 * y.powi(4),
            -20.0 * C5 * y.powi(3),
            -60.0 * C5 * y * y,
            -120.0 * C5 * y,
            -120.0 * C5,
        ]
    }
}

fn sqrt_shock(y: f64) -> [f64; 6] {
    let s = y.signum();
    let a = y.abs();
    [
        s * a.sqrt(),
        0.5 * a.powf(-0.5),
        s * -0.25 * a.powf(-1.5),
        0.375 * a.powf(-2.5),
        s * -0.9375 * a.powf(-3.5),
        3.28125 * a.powf(-4.5),
    ]
}

#[test]
fn polynomial_solution_at_critical_alpha() {
    let p = SimilarityParams::new(4.0 / 21.0, 1.0).unwrap();
    let (sup, _) = closed_form_residual(&rhs_blowup(p), &linspace(-5.0, 0.0, 501), critical_poly(1.0));
    assert!(sup < 1e-12, "residual {sup:e}");
}

#[test]
fn polynomial_residual_is_linear_off_critical() {
    let p = SimilarityParams::new(17.0 / 84.0, 1.0).unwrap();
    let model = rhs_blowup(p);
    let (sup, _) = closed_form_residual(&model, &linspace(-5.0, 0.0, 501), critical_poly(1.0));
    assert!((sup - 5.0 / 105.0).abs() < 1e-12, "residual {sup:e}");
}

#[test]
fn square_root_stationary_shock() {
    let p = SimilarityParams::new(1.0 / 9.0, 1.0).unwrap();
    let mut mesh = linspace(-5.0, -0.5, 200);
    mesh.extend(linspace(0.5, 5.0, 200));
    let (sup, _) = closed_form_residual(&rhs_blowup(p), &mesh, sqrt_shock);
    assert!(sup < 1e-12, "residual {sup:e}");
}

#[test]
fn explicit_compactons_are_exact() {
    assert!(ExplicitKind::K22.residual_sup(4001) < 1e-12);
    assert!(ExplicitKind::Quintic.residual_sup(4001) < 1e-10);
}

proptest! {
    #[test]
    fn pure_quintic_solves_for_every_alpha(alpha in 0.01f64..0.25, y in -20.0f64..-0.1) {
        let p = SimilarityParams::new(alpha, 1.0).unwrap();
        let scale = y.abs().powi(5) * C5;
        let (sup, _) = closed_form_residual(&rhs_blowup(p), &[y], critical_poly(0.0));
        prop_assert!(sup <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn polynomial_scaling_in_c(c in -3.0f64..3.0) {
        let p = SimilarityParams::new(17.0 / 84.0, 1.0).unwrap();
        let (sup, _) = closed_form_residual(&rhs_blowup(p), &linspace(-5.0, 0.0, 101), critical_poly(c));
        prop_assert!((sup - c.abs() * 5.0 / 105.0).abs() < 1e-11);
    }
}
