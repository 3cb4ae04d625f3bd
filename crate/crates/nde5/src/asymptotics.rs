//! Characteristic and Euler polynomials of the asymptotic bundles, interface
//! expansions, and oscillatory tail fitting.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{NdeKind, Profile, SimilarityParams};
use crate::poly::{real_poly_roots, roots, Poly};

/// Roots of `sum coeffs[k] x^k`.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    roots(coeffs)
}

/// Oscillation frequency of the linearization about a unit constant equilibrium,
/// `a₀ = (4⁴/5⁵)^{1/4} = 4·5^{−5/4}`.
pub fn equilibrium_frequency() -> f64 {
    4.0 * 5f64.powf(-1.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BundleContext {
    /// `Y ~ e^{a|z|^{5/4}}` about a constant level: `a⁴ = 4⁴/5⁵`.
    WkbjEquilibrium,
    /// `Y ~ e^{a(−y)^γ}` about `C₀|y|^{α/β}`: `C₀(γa)⁴ = β`.
    WkbjBlowupTail,
    /// Global tail: `C₀(γa)⁴ = −β`.
    WkbjGlobalTail,
    /// Euler polynomial `h_α(m)` about `f* = −y⁵/15120`.
    QuinticGrowthEuler,
    /// Euler polynomial `(m−1)(m−2)(m−3)(m−4) − 24` about `g* = −z⁵/120`.
    ShockQuinticEuler,
    /// Exponents about `A√|y − y₀|`.
    VanishingSqrt,
    /// `m(m−1)(m−2)(m−3) − 840` about `(y₀ − y)⁸/840²`.
    CompactonInterface,
}

impl FromStr for BundleContext {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "equilibrium" => BundleContext::WkbjEquilibrium,
            "blowup-tail" => BundleContext::WkbjBlowupTail,
            "global-tail" => BundleContext::WkbjGlobalTail,
            "euler-quintic" => BundleContext::QuinticGrowthEuler,
            "shock-quintic" => BundleContext::ShockQuinticEuler,
            "vanishing-sqrt" => BundleContext::VanishingSqrt,
            "compacton-interface" => BundleContext::CompactonInterface,
            other => return Err(Error::invalid(format!("unknown context '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BundleReport {
    pub context: BundleContext,
    /// Ascending coefficients of the characteristic polynomial.
    pub coefficients: Vec<f64>,
    pub roots: Vec<Complex64>,
    pub admissible: String,
    pub admissible_roots: Vec<Complex64>,
    pub bundle_dimension: usize,
    pub metrics: BTreeMap<String, f64>,
}

/// Relative size below which a real or imaginary part counts as zero.
const AXIS_TOL: f64 = 1e-9;

fn on_imaginary_axis(z: &Complex64) -> bool {
    z.re.abs() <= AXIS_TOL * z.norm().max(1e-300)
}

/// `γ = 1 + (1 − α/β)/4`.
pub fn wkbj_gamma(p: &SimilarityParams) -> f64 {
    1.0 + 0.25 * (1.0 - p.tail_exponent())
}

/// `h_α(m) = (m+1)(m+2)(m+3)(m+4)(m+5)/15120 − βm + α`.
pub fn euler_quintic(p: &SimilarityParams) -> Poly {
    Poly::from_real_roots(&[-1.0, -2.0, -3.0, -4.0, -5.0])
        .scale(1.0 / 15120.0)
        .add(&Poly::new(vec![p.alpha, -p.beta]))
}

pub fn char_exponents(context: BundleContext, p: &SimilarityParams) -> Result<BundleReport> {
    let mut metrics = BTreeMap::new();
    let (poly, admissible, pick): (Poly, &str, Box<dyn Fn(&Complex64) -> bool>) = match context {
        BundleContext::WkbjEquilibrium => {
            let a4 = 4f64.powi(4) / 5f64.powi(5);
            metrics.insert("a0".into(), equilibrium_frequency());
            metrics.insert("envelope_exponent".into(), -5.0 / 8.0);
            metrics.insert("phase_exponent".into(), 5.0 / 4.0);
            (Poly::new(vec![-a4, 0.0, 0.0, 0.0, 1.0]), "purely imaginary (oscillatory, non-growing)", Box::new(on_imaginary_axis))
        }
        BundleContext::WkbjBlowupTail | BundleContext::WkbjGlobalTail => {
            if !(p.c0 > 0.0) {
                return Err(Error::invalid("WKBJ tail contexts need C0 > 0"));
            }
            let g = wkbj_gamma(p);
            let sign = if context == BundleContext::WkbjBlowupTail { 1.0 } else { -1.0 };
            metrics.insert("gamma".into(), g);
            // C₀γ⁴a⁴ ∓ β = 0
            (
                Poly::new(vec![-sign * p.beta, 0.0, 0.0, 0.0, p.c0 * g.powi(4)]),
                "Re a <= 0 (non-growing as y -> -inf)",
                Box::new(|z: &Complex64| z.re <= AXIS_TOL * z.norm()),
            )
        }
        BundleContext::QuinticGrowthEuler => {
            let h = euler_quintic(p);
            metrics.insert("negative_real_roots".into(), h.sturm_count(f64::NEG_INFINITY, 0.0) as f64);
            metrics.insert("h_at_minus_5".into(), h.eval(-5.0));
            (h, "Re m < 5 (subdominant to y^5)", Box::new(|z: &Complex64| z.re < 5.0))
        }
        BundleContext::ShockQuinticEuler => {
            let q = Poly::from_real_roots(&[1.0, 2.0, 3.0, 4.0]).add(&Poly::new(vec![-24.0]));
            (q, "Re m < 5 (subdominant to z^5), plus m = 0 from Y = 1", Box::new(|z: &Complex64| z.re < 5.0 - 1e-9))
        }
        BundleContext::VanishingSqrt => (
            Poly::from_real_roots(&[1.5, 2.5, 3.5]),
            "exponents above 3/2 carry free coefficients, plus (y0, A)",
            Box::new(|z: &Complex64| z.re > 1.5 + 1e-9),
        ),
        BundleContext::CompactonInterface => {
            let q = Poly::from_real_roots(&[0.0, 1.0, 2.0, 3.0]).add(&Poly::new(vec![-840.0]));
            (q, "Re m < 8 excluded by the decay requirement; only y0 remains free", Box::new(|z: &Complex64| z.re > 8.0))
        }
    };
    let rts = real_poly_roots(&poly)?;
    let adm: Vec<Complex64> = rts.iter().filter(|z| pick(z)).copied().collect();
    let extra = match context {
        BundleContext::WkbjBlowupTail => 1,
        BundleContext::WkbjGlobalTail => 1,
        BundleContext::ShockQuinticEuler => 1,
        BundleContext::VanishingSqrt => 2,
        BundleContext::CompactonInterface => 1,
        _ => 0,
    };
    Ok(BundleReport {
        context,
        coefficients: poly.0.clone(),
        roots: rts,
        admissible: admissible.to_string(),
        bundle_dimension: adm.len() + extra,
        admissible_roots: adm,
        metrics,
    })
}

/// Leading interface behaviour `K·(z₀ − z)^n·|ln(z₀ − z)|^l`.
#[derive(Debug, Clone, Serialize)]
pub struct InterfaceExpansion {
    pub coefficient: f64,
    pub power: f64,
    pub log_power: i32,
    pub formula: String,
}

/// `p(p−1)(p−2)(p−3)`.
fn falling4(p: f64) -> f64 {
    p * (p - 1.0) * (p - 2.0) * (p - 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceKind {
    Shock(NdeKind),
    CompactonQuintic,
}

/// Leading term at a finite interface, from balancing the dominant ODE terms.
pub fn interface_expansion(kind: InterfaceKind, z0: f64) -> Result<InterfaceExpansion> {
    match kind {
        InterfaceKind::Shock(NdeKind::N14) => {
            // g = K r⁴, r = z₀ − z: (gg′)⁗ = −4K²·P(7) r³ against −(z₀/5)g′ = (4/5)Kz₀ r³
            let k = -z0 / (5.0 * falling4(7.0));
            Ok(InterfaceExpansion {
                coefficient: k,
                power: 4.0,
                log_power: 0,
                formula: format!("g ~ {k} (z0 - z)^4"),
            })
        }
        InterfaceKind::Shock(NdeKind::N50) => {
            // g = K r⁴|ln r|: gg⁽⁵⁾ ≈ 24K² r³|ln r| against −(z₀/5)g′ ≈ (4/5)Kz₀ r³|ln r|
            let k = 4.0 * z0 / (5.0 * 24.0);
            Ok(InterfaceExpansion {
                coefficient: k,
                power: 4.0,
                log_power: 1,
                formula: format!("g ~ {k} (z0 - z)^4 |ln(z0 - z)|"),
            })
        }
        InterfaceKind::CompactonQuintic => {
            // F⁗ = 2√F with F = K r⁸: P(8)K = 2√K
            let sk = 2.0 / falling4(8.0);
            Ok(InterfaceExpansion {
                coefficient: sk * sk,
                power: 8.0,
                log_power: 0,
                formula: format!("F ~ {} (y0 - y)^8", sk * sk),
            })
        }
        InterfaceKind::Shock(k) => Err(Error::invalid(format!("no interface expansion for {k}"))),
    }
}

/// Residual of the balance equation defining the interface coefficient.
pub fn interface_balance_residual(kind: InterfaceKind, z0: f64) -> Result<f64> {
    let e = interface_expansion(kind, z0)?;
    let k = e.coefficient;
    Ok(match kind {
        InterfaceKind::Shock(NdeKind::N14) => -4.0 * k * k * falling4(7.0) - 0.8 * k * z0,
        InterfaceKind::Shock(NdeKind::N50) => 24.0 * k * k - 0.8 * k * z0,
        InterfaceKind::CompactonQuintic => falling4(8.0) * k - 2.0 * k.sqrt(),
        _ => unreachable!(),
    })
}

/// Fitted `g − L ≈ |z|^p [A sin(a₀|z|^q) + B cos(a₀|z|^q)]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFit {
    pub envelope_exponent: f64,
    pub phase_exponent: f64,
    pub a0: f64,
    pub a: f64,
    pub b: f64,
    /// Far-field level used as the reference.
    pub level: f64,
    /// `a₀` rescaled to unit level (`a₀·L^{1/4}`).
    pub a0_unit_level: f64,
    pub rms_residual: f64,
    pub amplitude_sq: f64,
}

/// Model values for `(p, q, a₀)`; `A`, `B` (and the level when free) solved linearly.
fn linear_part(
    z: &[f64],
    g: &[f64],
    p: f64,
    q: f64,
    a0: f64,
    level: Option<f64>,
) -> Option<(Vec<f64>, f64, f64, f64, f64)> {
    let n = z.len();
    let ncol = if level.is_some() { 2 } else { 3 };
    let mut m = DMatrix::<f64>::zeros(n, ncol);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        let x = z[i].abs();
        let env = x.powf(p);
        let ph = a0 * x.powf(q);
        m[(i, 0)] = env * ph.sin();
        m[(i, 1)] = env * ph.cos();
        match level {
            Some(l) => rhs[i] = g[i] - l,
            None => {
                m[(i, 2)] = 1.0;
                rhs[i] = g[i];
            }
        }
    }
    let svd = m.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-12).ok()?;
    let fit = &m * &sol;
    let res: Vec<f64> = (0..n).map(|i| rhs[i] - fit[i]).collect();
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let lvl = level.unwrap_or_else(|| sol[2]);
    Some((res, sol[0], sol[1], lvl, rms))
}

/// Nonlinear least squares (Levenberg–Marquardt on `(p, q, a₀)` with the linear
/// amplitudes and, when `level` is `None`, the far-field level eliminated).
pub fn fit_oscillatory_tail(prof: &Profile, window: (f64, f64), level: Option<f64>) -> Result<TailFit> {
    let (za, zb) = (window.0.min(window.1), window.0.max(window.1));
    if za.abs().min(zb.abs()) < 20.0 && !(za < 0.0 && zb.abs() >= 20.0) {
        return Err(Error::invalid("fit window must satisfy |z| >= 20"));
    }
    let (lo, hi) = prof.span();
    if za < lo || zb > hi {
        return Err(Error::InsufficientTail(format!("window [{za}, {zb}] outside profile [{lo}, {hi}]")));
    }
    let pts: Vec<(f64, f64)> = prof
        .mesh
        .iter()
        .zip(&prof.jets)
        .filter(|(z, _)| **z >= za && **z <= zb)
        .map(|(z, j)| (*z, j[0]))
        .collect();
    if pts.len() < 20 {
        return Err(Error::InsufficientTail("fewer than 20 mesh points in the window".into()));
    }
    let z: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let g: Vec<f64> = pts.iter().map(|p| p.1).collect();
    fit_oscillatory_samples(&z, &g, level)
}

/// [`fit_oscillatory_tail`] on raw samples.
pub fn fit_oscillatory_samples(z: &[f64], g: &[f64], level: Option<f64>) -> Result<TailFit> {
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let spread = g.iter().fold(0.0f64, |m, v| m.max((v - level.unwrap_or(mean)).abs()));
    if spread < 1e-12 * mean.abs().max(1.0) {
        return Err(Error::FitDiverged("no oscillation about the level".into()));
    }
    let lvl0 = level.unwrap_or(mean);
    let a_guess = equilibrium_frequency() / lvl0.abs().max(1e-12).powf(0.25);
    // multistart over the frequency to avoid locking onto a neighbouring phase branch
    let mut best: Option<([f64; 3], f64)> = None;
    for fa in [0.9, 0.95, 1.0, 1.05, 1.1] {
        let start = [-0.625, 1.25, a_guess * fa];
        if let Some((x, r)) = levenberg_marquardt(z, g, start, level) {
            if best.map_or(true, |(_, rb)| r < rb) {
                best = Some((x, r));
            }
        }
    }
    let (x, _) = best.ok_or_else(|| Error::FitDiverged("no start converged".into()))?;
    let (_, a, b, lvl, rms) =
        linear_part(z, g, x[0], x[1], x[2], level).ok_or_else(|| Error::FitDiverged("singular".into()))?;
    if !(x.iter().all(|v| v.is_finite()) && rms.is_finite()) {
        return Err(Error::FitDiverged("non-finite parameters".into()));
    }
    Ok(TailFit {
        envelope_exponent: x[0],
        phase_exponent: x[1],
        a0: x[2],
        a,
        b,
        level: lvl,
        a0_unit_level: x[2] * lvl.abs().powf(0.25),
        rms_residual: rms,
        amplitude_sq: a * a + b * b,
    })
}

fn levenberg_marquardt(z: &[f64], g: &[f64], start: [f64; 3], level: Option<f64>) -> Option<([f64; 3], f64)> {
    let n = z.len();
    let resid = |x: &[f64; 3]| linear_part(z, g, x[0], x[1], x[2], level).map(|r| (r.0, r.4));
    let mut x = start;
    let (mut r, mut rms) = resid(&x)?;
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jac = DMatrix::<f64>::zeros(n, 3);
        for k in 0..3 {
            let h = 1e-7 * x[k].abs().max(1e-3);
            let mut xp = x;
            xp[k] += h;
            let (rp, _) = resid(&xp)?;
            for i in 0..n {
                jac[(i, k)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = DVector::from_vec(r.clone());
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &rv;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let xn = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            if xn[2] <= 0.0 || xn[1] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            if let Some((rn, rmsn)) = resid(&xn) {
                if rmsn < rms {
                    let rel = (rms - rmsn) / rms.max(1e-300);
                    x = xn;
                    r = rn;
                    rms = rmsn;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if rel < 1e-12 {
                        return Some((x, rms));
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some((x, rms))
}
