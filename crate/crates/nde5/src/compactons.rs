//! Compacton travelling waves: explicit profiles, the sign-changing compacton and the
//! nonnegative-compacton robustness probe.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::models::{Jet5, Profile, ProfileKind, SimilarityParams};
use crate::ode_core::{integrate, IvpSpec, Termination, Trajectory};
use crate::parallel::{self, Exec};
use crate::poly::Poly;

/// Closed-form compactons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExplicitKind {
    /// `f = (4/3) cos²(y/4)` on `|y| ≤ 2π`, solving `f = (f²)″ + f²`.
    K22,
    /// `f = (1/105) cos⁴(y/2)` on `|y| ≤ π`, solving `f = (f²)⁗ + 25(f²)″ + 144 f²`.
    Quintic,
}

impl ExplicitKind {
    pub fn half_width(self) -> f64 {
        match self {
            ExplicitKind::K22 => 2.0 * std::f64::consts::PI,
            ExplicitKind::Quintic => std::f64::consts::PI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExplicitKind::K22 => "k22",
            ExplicitKind::Quintic => "quintic",
        }
    }

    /// `f, f′, …, f⁗` at `y` (zero outside the support).
    pub fn derivs(self, y: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        if y.abs() > self.half_width() {
            return out;
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        match self {
            ExplicitKind::K22 => {
                // (2/3)(1 + cos(y/2))
                out[0] = 2.0 / 3.0 * (1.0 + (y / 2.0).cos());
                for (k, o) in out.iter_mut().enumerate().skip(1) {
                    *o = 2.0 / 3.0 * 0.5f64.powi(k as i32) * (y / 2.0 + k as f64 * half_pi).cos();
                }
            }
            ExplicitKind::Quintic => {
                // (1/105)(3/8 + cos(y)/2 + cos(2y)/8)
                for (k, o) in out.iter_mut().enumerate() {
                    let ph = k as f64 * half_pi;
                    let c = if k == 0 { 3.0 / 8.0 } else { 0.0 };
                    *o = (c + 0.5 * (y + ph).cos() + 2f64.powi(k as i32) / 8.0 * (2.0 * y + ph).cos())
                        / 105.0;
                }
            }
        }
        out
    }

    /// Pointwise residual of the integrated travelling-wave equation.
    pub fn residual(self, y: f64) -> f64 {
        let [f, f1, f2, f3, f4] = self.derivs(y);
        let sq2 = 2.0 * (f * f2 + f1 * f1);
        match self {
            ExplicitKind::K22 => f - sq2 - f * f,
            ExplicitKind::Quintic => {
                let sq4 = 2.0 * (f * f4 + 4.0 * f1 * f3 + 3.0 * f2 * f2);
                f - sq4 - 25.0 * sq2 - 144.0 * f * f
            }
        }
    }

    /// Sup of the residual on `n` equally spaced points of the open support.
    pub fn residual_sup(self, n: usize) -> f64 {
        let w = self.half_width();
        (1..=n)
            .map(|i| self.residual(-w + 2.0 * w * i as f64 / (n + 1) as f64).abs())
            .fold(0.0, f64::max)
    }
}

impl FromStr for ExplicitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k22" => Ok(ExplicitKind::K22),
            "quintic" => Ok(ExplicitKind::Quintic),
            _ => Err(Error::invalid(format!("unknown explicit compacton '{s}'"))),
        }
    }
}

/// Near-interface oscillation of a sign-changing compacton.
#[derive(Debug, Clone, Serialize)]
pub struct Oscillation {
    /// Sign changes of the computed `F` within `(y₀ − 10⁻², y₀)`.
    pub sign_changes_near: usize,
    /// Slope of `log |F|` local maxima against `log(y₀ − y)`.
    pub envelope_exponent: f64,
    /// Period of the oscillatory component in `s = ln(y₀ − y)`.
    pub phi_period: f64,
    pub phi_amplitude: f64,
    /// Phase shift of the interface bundle.
    pub s0: f64,
    /// Local maxima of `F` on the whole line above a tenth of `max F`.
    pub lobes: usize,
    /// Distance from the interface where the bundle hands over to integration.
    pub hand_over: f64,
}

#[derive(Debug, Clone)]
pub enum CompactonSource {
    ClosedForm(ExplicitKind),
    /// `F = |f| f` on `[0, y₀ − r_s]` (jets `F … F⁗`), continued by the interface bundle.
    Numeric { branch: usize, nu: f64, profile: Profile, phi: PeriodicPhi },
    /// Plain samples of `F` on `[0, y₀)`, used for manufactured inputs.
    Samples { y: Vec<f64>, big_f: Vec<f64> },
}

/// A compactly supported even travelling-wave profile on `[−y₀, y₀]`.
#[derive(Debug, Clone)]
pub struct CompactonProfile {
    pub source: CompactonSource,
    pub y0: f64,
    pub interface_exponent: f64,
    pub oscillation: Option<Oscillation>,
}

impl CompactonProfile {
    pub fn support(&self) -> (f64, f64) {
        (-self.y0, self.y0)
    }

    /// Profile given by samples of `F` on increasing `y ∈ [0, y₀)`.
    pub fn from_samples(y: Vec<f64>, big_f: Vec<f64>, y0: f64) -> Result<Self> {
        if y.len() != big_f.len() || y.len() < 2 {
            return Err(Error::invalid("sample vectors must match and hold at least two points"));
        }
        if !y.windows(2).all(|w| w[1] > w[0]) || y[0] < 0.0 || *y.last().unwrap() >= y0 {
            return Err(Error::invalid("samples must increase inside [0, y0)"));
        }
        Ok(CompactonProfile {
            source: CompactonSource::Samples { y, big_f },
            y0,
            interface_exponent: f64::NAN,
            oscillation: None,
        })
    }

    pub fn explicit(which: ExplicitKind) -> Self {
        let exponent = match which {
            ExplicitKind::K22 => 2.0,
            ExplicitKind::Quintic => 4.0,
        };
        CompactonProfile {
            source: CompactonSource::ClosedForm(which),
            y0: which.half_width(),
            interface_exponent: exponent,
            oscillation: None,
        }
    }

    /// `F = |f| f` at `y`, zero outside the support.
    pub fn big_f(&self, y: f64) -> f64 {
        let a = y.abs();
        if a >= self.y0 {
            return 0.0;
        }
        match &self.source {
            CompactonSource::ClosedForm(k) => {
                let f = k.derivs(a)[0];
                f.abs() * f
            }
            CompactonSource::Numeric { profile, phi, .. } => {
                let end = *profile.mesh.last().unwrap();
                if a <= end {
                    profile.eval(a).map(|j| j[0]).unwrap_or(0.0)
                } else {
                    let s0 = self.oscillation.as_ref().map_or(0.0, |o| o.s0);
                    phi.bundle(self.y0 - a, s0)[0]
                }
            }
            CompactonSource::Samples { y, big_f } => {
                let k = y.partition_point(|&v| v < a);
                if k == 0 {
                    big_f[0]
                } else if k == y.len() {
                    let (ya, fa) = (y[k - 1], big_f[k - 1]);
                    fa * (self.y0 - a) / (self.y0 - ya)
                } else {
                    let t = (a - y[k - 1]) / (y[k] - y[k - 1]);
                    big_f[k - 1] + t * (big_f[k] - big_f[k - 1])
                }
            }
        }
    }

    /// `f = sign(F) √|F|`.
    pub fn f(&self, y: f64) -> f64 {
        match &self.source {
            CompactonSource::ClosedForm(k) => k.derivs(y)[0],
            _ => {
                let v = self.big_f(y);
                v.signum() * v.abs().sqrt()
            }
        }
    }

    /// Samples `(y, F, f)` on `n` points of `[−y₀, y₀]`.
    pub fn samples(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let y = -self.y0 + 2.0 * self.y0 * i as f64 / (n - 1) as f64;
                (y, self.big_f(y), self.f(y))
            })
            .collect()
    }

    pub fn metadata(&self) -> serde_json::Value {
        let (kind, branch, nu) = match &self.source {
            CompactonSource::ClosedForm(k) => (k.name().to_string(), None, None),
            CompactonSource::Numeric { branch, nu, .. } => ("oscillatory".into(), Some(*branch), Some(*nu)),
            CompactonSource::Samples { .. } => ("samples".into(), None, None),
        };
        json!({
            "kind": kind,
            "y0": self.y0,
            "branch": branch,
            "nu": nu,
            "interface_exponent": self.interface_exponent,
            "oscillation": self.oscillation,
        })
    }

    /// Writes `y,F,f` with 16 significant digits.
    pub fn write_csv(&self, path: &Path, n: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["y", "F", "f"])?;
        for (y, big, f) in self.samples(n) {
            w.write_record([fmt16(y), fmt16(big), fmt16(f)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt16(x: f64) -> String {
    crate::models::fmt16(x)
}

pub fn explicit_compacton(which: ExplicitKind) -> CompactonProfile {
    CompactonProfile::explicit(which)
}

// ---------------------------------------------------------------------------
// Interface series and the robustness probe

/// Equations `Σ p_k F⁽ᵏ⁾ = c √F` probed for nonnegative compactons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeEquation {
    /// `F⁗ + ε F″ + F = 2√F`.
    GenericQuintic,
    /// `F⁗ + 25(1+ε) F″ + 144 F = √F`, exact compacton at `ε = 0`.
    TunedQuintic,
    /// `F″ + (1+ε) F = √F`, the third-order K22 equation.
    ThirdOrder,
}

impl ProbeEquation {
    pub const ALL: [ProbeEquation; 3] =
        [ProbeEquation::GenericQuintic, ProbeEquation::TunedQuintic, ProbeEquation::ThirdOrder];

    pub fn name(self) -> &'static str {
        match self {
            ProbeEquation::GenericQuintic => "generic-quintic",
            ProbeEquation::TunedQuintic => "tuned-quintic",
            ProbeEquation::ThirdOrder => "third-order",
        }
    }

    /// Linear coefficients `p_0..p_n` and the root coefficient `c`.
    pub fn coefficients(self, eps: f64) -> (Vec<f64>, f64) {
        match self {
            ProbeEquation::GenericQuintic => (vec![1.0, 0.0, eps, 0.0, 1.0], 2.0),
            ProbeEquation::TunedQuintic => (vec![144.0, 0.0, 25.0 * (1.0 + eps), 0.0, 1.0], 1.0),
            ProbeEquation::ThirdOrder => (vec![1.0 + eps, 0.0, 1.0], 1.0),
        }
    }

    pub fn order(self) -> usize {
        match self {
            ProbeEquation::ThirdOrder => 2,
            _ => 4,
        }
    }

    /// Derivative orders fixed by symmetry at the origin.
    pub fn symmetry_conditions(self) -> Vec<usize> {
        match self {
            ProbeEquation::ThirdOrder => vec![1],
            _ => vec![1, 3],
        }
    }
}

impl FromStr for ProbeEquation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProbeEquation::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown probe equation '{s}'")))
    }
}

/// Nonnegative interface expansion `F = G²`, `G = r^n Σ g_j r^j`, `r = y₀ − y`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSeries {
    pub order: usize,
    pub g: Vec<f64>,
    p: Vec<f64>,
}

impl InterfaceSeries {
    /// Matches `Σ p_k F⁽ᵏ⁾ = c √F` order by order with `terms` coefficients of `G`.
    pub fn new(p: &[f64], c: f64, terms: usize) -> Result<Self> {
        let n = p.len() - 1;
        if n == 0 || p[n] == 0.0 || c <= 0.0 || terms == 0 {
            return Err(Error::invalid("interface series needs a leading derivative and c > 0"));
        }
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        // (2n)!/n! p_n g0² = c g0
        let g0 = c * fact(n) / (fact(2 * n) * p[n] * if n % 2 == 0 { 1.0 } else { -1.0 });
        if g0 <= 0.0 {
            return Err(Error::invalid("no nonnegative interface expansion for this equation"));
        }
        let mut s = InterfaceSeries { order: n, g: vec![g0], p: p.to_vec() };
        for j in 1..terms {
            s.g.push(0.0);
            let r0 = s.residual_coefficient(n + j, c);
            s.g[j] = 1.0;
            let r1 = s.residual_coefficient(n + j, c);
            let slope = r1 - r0;
            if slope.abs() < 1e-300 {
                return Err(Error::invalid(format!("resonant interface coefficient at order {j}")));
            }
            s.g[j] = -r0 / slope;
        }
        Ok(s)
    }

    fn g_poly(&self) -> Poly {
        let mut c = vec![0.0; self.order];
        c.extend_from_slice(&self.g);
        Poly::new(c)
    }

    /// `F` as a polynomial in `r`.
    pub fn f_poly(&self) -> Poly {
        let g = self.g_poly();
        g.mul(&g)
    }

    fn residual_coefficient(&self, power: usize, c: f64) -> f64 {
        let f = self.f_poly();
        let mut lhs = Poly::new(vec![0.0]);
        for (k, &pk) in self.p.iter().enumerate() {
            if pk != 0.0 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                lhs = lhs.add(&f.nth_derivative(k).scale(sign * pk));
            }
        }
        lhs.add(&self.g_poly().scale(-c)).coeff(power)
    }

    /// `F, F_y, …` (`order` entries) at distance `r` from the interface.
    pub fn state(&self, r: f64) -> Vec<f64> {
        let f = self.f_poly();
        (0..self.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * f.nth_derivative(k).eval(r)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    pub y0_min: f64,
    pub y0_max: f64,
    pub points: usize,
    /// Threshold separating a vanishing defect from a dimensional mismatch.
    pub tol: f64,
    pub rel_tol: f64,
    /// Distance from the interface where integration starts.
    pub interface_offset: f64,
    pub series_terms: usize,
    pub exec: Exec,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            y0_min: 1.0,
            y0_max: 20.0,
            points: 96,
            tol: 1e-8,
            rel_tol: 1e-12,
            interface_offset: 0.05,
            series_terms: 12,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub equation: ProbeEquation,
    pub epsilon: f64,
    pub conditions: usize,
    pub y0_grid: Vec<f64>,
    pub defects: Vec<f64>,
    pub min_defect: f64,
    pub argmin_y0: f64,
    pub tol: f64,
    /// The defect vanishes to `tol` somewhere in the sweep.
    pub solvable: bool,
}

/// Normalized symmetry defect `(y₀ᵏ |F⁽ᵏ⁾(0)| / max|F|)_k` of the backward shot from the
/// nonnegative interface bundle at `y₀`.
pub fn probe_defect(eq: ProbeEquation, eps: f64, y0: f64, opts: &ProbeOptions) -> Result<Vec<f64>> {
    let (p, c) = eq.coefficients(eps);
    let series = InterfaceSeries::new(&p, c, opts.series_terms)?;
    probe_defect_with(&series, &p, c, eq, y0, opts)
}

fn probe_defect_with(
    series: &InterfaceSeries,
    p: &[f64],
    c: f64,
    eq: ProbeEquation,
    y0: f64,
    opts: &ProbeOptions,
) -> Result<Vec<f64>> {
    let n = p.len() - 1;
    let r_s = opts.interface_offset.min(0.5 * y0);
    let start = series.state(r_s);
    let scale = start[0].abs().max(1e-300);
    let pn = p[n];
    let rhs = move |_y: f64, u: &[f64], du: &mut [f64]| {
        du[..n - 1].copy_from_slice(&u[1..n]);
        let mut top = c * u[0].signum() * u[0].abs().sqrt();
        for k in 0..n {
            top -= p[k] * u[k];
        }
        du[n - 1] = top / pn;
    };
    let spec = IvpSpec::new(rhs, y0 - r_s, start, 0.0)
        .tolerances(opts.rel_tol, 1e-6 * opts.rel_tol * scale)
        .overflow(1e200);
    let traj = integrate(&spec)?;
    if !matches!(traj.termination, Termination::ReachedEnd) {
        return Err(Error::IntegrationFailed(format!("probe shot at y0 = {y0}: {:?}", traj.termination)));
    }
    let fmax = traj.y.iter().fold(0.0f64, |m, u| m.max(u[0].abs())).max(1e-300);
    let end = traj.y_last();
    Ok(eq.symmetry_conditions().iter().map(|&k| y0.powi(k as i32) * end[k].abs() / fmax).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sweeps `y₀` for one equation and refines the smallest defect by golden sections.
pub fn probe_equation(eq: ProbeEquation, eps: f64, opts: &ProbeOptions) -> Result<ProbeReport> {
    if !(opts.y0_min > 0.0 && opts.y0_max > opts.y0_min && opts.points >= 3) {
        return Err(Error::invalid("probe sweep needs 0 < y0_min < y0_max and at least 3 points"));
    }
    let (p, c) = eq.coefficients(eps);
    let series = InterfaceSeries::new(&p, c, opts.series_terms)?;
    let grid: Vec<f64> = (0..opts.points)
        .map(|i| opts.y0_min + (opts.y0_max - opts.y0_min) * i as f64 / (opts.points - 1) as f64)
        .collect();
    let eval = |y0: f64| probe_defect_with(&series, &p, c, eq, y0, opts).map(|d| norm(&d)).unwrap_or(f64::INFINITY);
    let defects = parallel::map(opts.exec, &grid, |&y0| eval(y0));
    let minima: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let left = i == 0 || defects[i - 1] >= defects[i];
            let right = i + 1 == grid.len() || defects[i + 1] >= defects[i];
            left && right && defects[i].is_finite()
        })
        .collect();
    let refined = parallel::map(opts.exec, &minima, |&k| {
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(grid.len() - 1)];
        let (y, d) = golden_min(&eval, lo, hi);
        if d < defects[k] { (y, d) } else { (grid[k], defects[k]) }
    });
    let (best_y, best) = refined
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((f64::NAN, f64::INFINITY));
    Ok(ProbeReport {
        equation: eq,
        epsilon: eps,
        conditions: eq.symmetry_conditions().len(),
        y0_grid: grid,
        defects,
        min_defect: best,
        argmin_y0: best_y,
        tol: opts.tol,
        solvable: best < opts.tol,
    })
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if b - a < 1e-15 * b.abs().max(1.0) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 { (x1, f1) } else { (x2, f2) }
}

/// Probe of every equation at every coefficient perturbation `ε`.
pub fn robustness_probe(eps: &[f64], opts: &ProbeOptions) -> Result<Vec<ProbeReport>> {
    let mut out = Vec::new();
    for eq in ProbeEquation::ALL {
        for &e in eps {
            out.push(probe_equation(eq, e, opts)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sign-changing compactons

/// Characteristic polynomial `(D+5)(D+6)(D+7)(D+8)` of `r⁴ ∂_r⁴ (r⁸ φ(ln r))`.
const PHI_LINEAR: [f64; 4] = [1680.0, 1066.0, 251.0, 26.0];

fn phi_rhs(_s: f64, u: &[f64], du: &mut [f64]) {
    du[0] = u[1];
    du[1] = u[2];
    du[2] = u[3];
    let lin: f64 = (0..4).map(|k| PHI_LINEAR[k] * u[k]).sum();
    du[3] = -2.0 * u[0].signum() * u[0].abs().sqrt() - lin;
}

/// Periodic solution of `(D+5)(D+6)(D+7)(D+8)φ = −2 sign(φ)√|φ|`, the oscillatory
/// component of `F = r⁸ φ(ln r)` at the interface of `F⁗ = F − 2|F|^{−1/2}F`.
#[derive(Debug, Clone)]
pub struct PeriodicPhi {
    pub period: f64,
    pub amplitude: f64,
    orbit: Trajectory,
}

impl PeriodicPhi {
    pub fn compute() -> Result<Self> {
        let tol = |x: f64| (1e-13, 1e-13 * x);
        // the orbit attracts forward in s
        let (rt, at) = tol(1e-7);
        let warm = integrate(&IvpSpec::new(phi_rhs, 0.0, vec![1e-6, 0.0, 0.0, 0.0], 60.0).tolerances(rt, at))?;
        let mut u = warm.y_last().to_vec();
        let first = integrate(&IvpSpec::new(phi_rhs, 0.0, u.clone(), 5.0).tolerances(rt, at).event(|_, u| u[0]))?;
        let Termination::EventFired { .. } = first.termination else {
            return Err(Error::NoOscillation("interface component does not oscillate".into()));
        };
        u = first.y_last().to_vec();
        let half = |u0: &[f64]| -> Result<(Vec<f64>, f64)> {
            let pre = integrate(&IvpSpec::new(phi_rhs, 0.0, u0.to_vec(), 0.05).tolerances(rt, at))?;
            let tr = integrate(
                &IvpSpec::new(phi_rhs, 0.05, pre.y_last().to_vec(), 5.0).tolerances(rt, at).event(|_, u| u[0]),
            )?;
            match tr.termination {
                Termination::EventFired { t, .. } => Ok((tr.y_last().to_vec(), t)),
                _ => Err(Error::NoOscillation("no half-period return".into())),
            }
        };
        let (_, mut t_half) = half(&u)?;
        // Newton on the odd half-period map Φ_T(0, v) = −(0, v), unknowns (v, T)
        let flow = |v: &Vector4<f64>| -> Result<Vector4<f64>> {
            let y0 = vec![0.0, v[0], v[1], v[2]];
            let tr = integrate(&IvpSpec::new(phi_rhs, 0.0, y0.clone(), v[3]).tolerances(rt, at))?;
            let e = tr.y_last();
            Ok(Vector4::new(e[0], e[1] + v[0], e[2] + v[1], e[3] + v[2]))
        };
        let mut v = Vector4::new(u[1], u[2], u[3], t_half);
        for _ in 0..20 {
            let r = flow(&v)?;
            let mut jac = Matrix4::zeros();
            for c in 0..4 {
                let mut w = v;
                let h = 1e-7 * v[c].abs().max(1e-12);
                w[c] += h;
                let rc = flow(&w)?;
                jac.set_column(c, &((rc - r) / h));
            }
            let step = jac.lu().solve(&(-r)).ok_or(Error::SingularJacobian(0))?;
            v += step;
            if step.abs().max() < 1e-13 * v.abs().max() {
                break;
            }
        }
        t_half = v[3];
        let start = vec![0.0, v[0], v[1], v[2]];
        let orbit =
            integrate(&IvpSpec::new(phi_rhs, 0.0, start, 2.0 * t_half).tolerances(rt, at).max_step(t_half / 50.0))?;
        let amplitude = orbit.y.iter().fold(0.0f64, |m, u| m.max(u[0].abs()));
        Ok(PeriodicPhi { period: 2.0 * t_half, amplitude, orbit })
    }

    /// `(φ, φ′, φ″, φ‴)` at phase `s`.
    pub fn jet(&self, s: f64) -> [f64; 4] {
        let t = s.rem_euclid(self.period).clamp(0.0, self.orbit.t_last());
        let v = self.orbit.dense_eval(t).expect("phase inside one period");
        [v[0], v[1], v[2], v[3]]
    }

    /// `(F, F′, F″, F‴)` in `y` of `F = r⁸ φ(ln r + s₀)`, `r = y₀ − y`.
    pub fn bundle(&self, r: f64, s0: f64) -> [f64; 4] {
        let [p0, p1, p2, p3] = self.jet(r.ln() + s0);
        let a1 = 8.0 * p0 + p1;
        let a2 = 56.0 * p0 + 15.0 * p1 + p2;
        let a3 = 336.0 * p0 + 146.0 * p1 + 21.0 * p2 + p3;
        [r.powi(8) * p0, -r.powi(7) * a1, r.powi(6) * a2, -r.powi(5) * a3]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OscillatoryOptions {
    /// Regularization of `|F|^{−1/2}` as `(ν² + F²)^{−1/4}`; zero keeps the exact nonlinearity.
    pub nu: f64,
    /// Distance from the interface where the bundle hands over to integration.
    pub interface_offset: f64,
    pub rel_tol: f64,
    /// Newton tolerance on the normalized symmetry defect.
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Exec,
}

impl Default for OscillatoryOptions {
    fn default() -> Self {
        OscillatoryOptions {
            nu: 0.0,
            interface_offset: 1e-3,
            rel_tol: 1e-11,
            tol: 1e-8,
            max_iter: 40,
            exec: Exec::default(),
        }
    }
}

impl OscillatoryOptions {
    /// Hand-over distance: the given offset, moved out with `ν > 0` to where the bundle
    /// satisfies `|F| ≥ 100 ν` so the regularization acts only on resolved values.
    pub fn hand_over(&self, phi: &PeriodicPhi) -> f64 {
        if self.nu > 0.0 {
            self.interface_offset.max((100.0 * self.nu / phi.amplitude).powf(0.125))
        } else {
            self.interface_offset
        }
    }
}

fn oscillatory_nonlinearity(f: f64, nu: f64) -> f64 {
    if nu == 0.0 {
        2.0 * f.signum() * f.abs().sqrt()
    } else {
        2.0 * f / (nu * nu + f * f).powf(0.25)
    }
}

fn shoot_oscillatory(phi: &PeriodicPhi, y0: f64, s0: f64, opts: &OscillatoryOptions) -> Result<Trajectory> {
    let r_s = opts.hand_over(phi);
    if !(y0 > 2.0 * r_s) {
        return Err(Error::invalid("interface position too close to the origin"));
    }
    let start = phi.bundle(r_s, s0).to_vec();
    let scale = start.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let nu = opts.nu;
    let rhs = move |_y: f64, u: &[f64], du: &mut [f64]| {
        du[0] = u[1];
        du[1] = u[2];
        du[2] = u[3];
        du[3] = u[0] - oscillatory_nonlinearity(u[0], nu);
    };
    let spec = IvpSpec::new(rhs, y0 - r_s, start, 0.0)
        .tolerances(opts.rel_tol, 1e-3 * opts.rel_tol * scale)
        .overflow(1e100);
    let traj = integrate(&spec)?;
    match traj.termination {
        Termination::ReachedEnd => Ok(traj),
        t => Err(Error::IntegrationFailed(format!("compacton shot at y0 = {y0}: {t:?}"))),
    }
}

/// Defect `(F′(0), F‴(0)) / max|F|` over the shot and its `y₀`-derivative, which follows
/// from translation invariance.
fn symmetry_defect(traj: &Trajectory, nu: f64) -> (Vector2<f64>, Vector2<f64>) {
    let m = traj.y.iter().fold(0.0f64, |m, u| m.max(u[0].abs())).max(1e-300);
    let e = traj.y_last();
    let f4 = e[0] - oscillatory_nonlinearity(e[0], nu);
    (Vector2::new(e[1] / m, e[3] / m), Vector2::new(-e[2] / m, -f4 / m))
}

/// Normalized symmetry defect of the shot from the bundle at `(y₀, s₀)`.
pub fn oscillatory_defect(phi: &PeriodicPhi, y0: f64, s0: f64, opts: &OscillatoryOptions) -> Result<[f64; 2]> {
    let tr = shoot_oscillatory(phi, y0, s0, opts)?;
    let (d, _) = symmetry_defect(&tr, opts.nu);
    Ok([d[0], d[1]])
}

/// Cells of a `(y₀, s₀)` grid over which both defect components change sign; returns
/// cell centres as Newton seeds. `s₀` spans one period periodically.
pub fn scan_oscillatory(
    phi: &PeriodicPhi,
    y0_range: (f64, f64),
    ny: usize,
    ns: usize,
    opts: &OscillatoryOptions,
) -> Vec<(f64, f64)> {
    let ys: Vec<f64> = (0..ny).map(|i| y0_range.0 + (y0_range.1 - y0_range.0) * i as f64 / (ny - 1) as f64).collect();
    let ss: Vec<f64> = (0..ns).map(|j| phi.period * j as f64 / ns as f64).collect();
    let nodes: Vec<(f64, f64)> = ys.iter().flat_map(|&y| ss.iter().map(move |&s| (y, s))).collect();
    let vals = parallel::map(opts.exec, &nodes, |&(y, s)| oscillatory_defect(phi, y, s, opts).ok());
    let at = |i: usize, j: usize| vals[i * ns + j % ns];
    let mut seeds = Vec::new();
    for i in 0..ny - 1 {
        for j in 0..ns {
            let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            if corners.iter().any(|c| c.is_none()) {
                continue;
            }
            let c: Vec<[f64; 2]> = corners.iter().map(|c| c.unwrap()).collect();
            let changes = |k: usize| c.iter().any(|v| v[k] > 0.0) && c.iter().any(|v| v[k] < 0.0);
            if changes(0) && changes(1) {
                let s_mid = if j + 1 == ns { ss[j] + 0.5 * phi.period / ns as f64 } else { 0.5 * (ss[j] + ss[j + 1]) };
                seeds.push((0.5 * (ys[i] + ys[i + 1]), s_mid));
            }
        }
    }
    seeds
}

/// Solution of the 2×2 matching problem from one seed `(y₀, s₀)`.
pub fn newton_oscillatory(
    phi: &PeriodicPhi,
    seed: (f64, f64),
    opts: &OscillatoryOptions,
) -> Result<(f64, f64, Trajectory, usize)> {
    let (mut y0, mut s0) = seed;
    let eval = |y0: f64, s0: f64| -> Result<(Vector2<f64>, Vector2<f64>, Trajectory)> {
        let tr = shoot_oscillatory(phi, y0, s0, opts)?;
        let (d, dy) = symmetry_defect(&tr, opts.nu);
        Ok((d, dy, tr))
    };
    let (mut r, mut dy, mut tr) = eval(y0, s0)?;
    for it in 0..opts.max_iter {
        if r.norm() < opts.tol {
            return Ok((y0, s0, tr, it));
        }
        let hs = 1e-6;
        let (rs, _, _) = eval(y0, s0 + hs)?;
        let jac = Matrix2::from_columns(&[dy, (rs - r) / hs]);
        let step = jac.lu().solve(&(-r)).ok_or(Error::SingularJacobian(0))?;
        let mut lambda = 1.0;
        loop {
            let (cy, cs) = (y0 + lambda * step[0], s0 + lambda * step[1]);
            if cy > 2.0 * opts.hand_over(phi) {
                if let Ok((rc, dc, tc)) = eval(cy, cs) {
                    if rc.norm() < (1.0 - 1e-4 * lambda) * r.norm() {
                        y0 = cy;
                        s0 = cs;
                        r = rc;
                        dy = dc;
                        tr = tc;
                        break;
                    }
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(Error::NewtonDiverged { iterations: it, residual: r.norm() });
            }
        }
    }
    if r.norm() < opts.tol {
        Ok((y0, s0, tr, opts.max_iter))
    } else {
        Err(Error::NewtonDiverged { iterations: opts.max_iter, residual: r.norm() })
    }
}

fn sign_changes(v: impl Iterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for x in v {
        if x != 0.0 {
            if last != 0.0 && x.signum() != last.signum() {
                count += 1;
            }
            last = x;
        }
    }
    count
}

/// Slope of `log |F|` at its local maxima against `log r`.
fn envelope_slope(r: &[f64], big_f: &[f64]) -> Option<f64> {
    let mut pts = Vec::new();
    for i in 1..big_f.len().saturating_sub(1) {
        let (a, b, c) = (big_f[i - 1].abs(), big_f[i].abs(), big_f[i + 1].abs());
        if b > a && b >= c && b > 0.0 {
            pts.push((r[i].ln(), b.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Local maxima above a tenth of `max F` of the even extension.
fn lobe_count(jets: &[Jet5]) -> usize {
    let f: Vec<f64> = jets.iter().map(|j| j[0]).collect();
    let fmax = f.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut lobes = usize::from(f.len() > 1 && f[0] >= f[1] && f[0] > 0.1 * fmax);
    for i in 1..f.len().saturating_sub(1) {
        if f[i] > f[i - 1] && f[i] >= f[i + 1] && f[i] > 0.1 * fmax {
            lobes += 2;
        }
    }
    lobes
}

fn build_oscillatory(
    phi: &PeriodicPhi,
    branch: usize,
    y0: f64,
    s0: f64,
    traj: &Trajectory,
    iterations: usize,
    opts: &OscillatoryOptions,
) -> Result<CompactonProfile> {
    let r_s = opts.hand_over(phi);
    let y_end = y0 - r_s;
    // uniform in y away from the interface, uniform in ln r close to it
    let r_join = (0.1f64).max(2.0 * r_s).min(0.5 * y0);
    let mut ys: Vec<f64> = (0..=400).map(|i| (y0 - r_join) * i as f64 / 400.0).collect();
    let decades = (r_join / r_s).ln();
    let m = (decades * 200.0).ceil() as usize;
    for i in 1..=m {
        ys.push(y0 - r_join * (-(decades * i as f64 / m as f64)).exp());
    }
    let mut jets = Vec::with_capacity(ys.len());
    for &y in &ys {
        let u = traj.dense_eval(y.min(y_end))?;
        let f4 = u[0] - oscillatory_nonlinearity(u[0], opts.nu);
        jets.push([u[0], u[1], u[2], u[3], f4] as Jet5);
    }
    let mut prov = BTreeMap::new();
    prov.insert("solver".into(), json!("interface-bundle shooting"));
    prov.insert("y0".into(), json!(y0));
    prov.insert("s0".into(), json!(s0));
    prov.insert("nu".into(), json!(opts.nu));
    prov.insert("interface_offset".into(), json!(r_s));
    prov.insert("rel_tol".into(), json!(opts.rel_tol));
    prov.insert("newton_iterations".into(), json!(iterations));
    let profile = Profile::new(ProfileKind::Compacton, SimilarityParams::riemann(), ys, jets, prov)?;

    let near: Vec<(f64, f64)> = profile
        .mesh
        .iter()
        .zip(&profile.jets)
        .filter(|(y, _)| y0 - **y < 1e-2)
        .map(|(y, j)| (y0 - y, j[0]))
        .collect();
    let sign_changes_near = sign_changes(near.iter().map(|p| p.1));
    let (rs, fs): (Vec<f64>, Vec<f64>) = profile
        .mesh
        .iter()
        .zip(&profile.jets)
        .filter(|(y, _)| y0 - **y < 0.05)
        .map(|(y, j)| (y0 - y, j[0]))
        .unzip();
    let envelope_exponent = envelope_slope(&rs, &fs).unwrap_or(f64::NAN);
    let lobes = lobe_count(&profile.jets);
    Ok(CompactonProfile {
        source: CompactonSource::Numeric { branch, nu: opts.nu, profile, phi: phi.clone() },
        y0,
        interface_exponent: 8.0,
        oscillation: Some(Oscillation {
            sign_changes_near,
            envelope_exponent,
            phi_period: phi.period,
            phi_amplitude: phi.amplitude,
            s0,
            lobes,
            hand_over: r_s,
        }),
    })
}

/// Phase `s₀ ∈ [0, P/2)` that suppresses the growing mode of the backward shot at `y₀`,
/// located as a sign change of `F′(0) / max|F′|`.
pub fn bounded_phase(phi: &PeriodicPhi, y0: f64, opts: &OscillatoryOptions) -> Result<f64> {
    let ratio = |s0: f64| -> Result<f64> {
        let tr = shoot_oscillatory(phi, y0, s0, opts)?;
        let m = tr.y.iter().fold(0.0f64, |m, u| m.max(u[1].abs())).max(1e-300);
        Ok(tr.y_last()[1] / m)
    };
    let n = 24;
    let half = 0.5 * phi.period;
    let grid: Vec<f64> = (0..=n).map(|j| half * j as f64 / n as f64).collect();
    let vals = parallel::map(opts.exec, &grid, |&s| ratio(s));
    for j in 0..n {
        let (Ok(a), Ok(b)) = (&vals[j], &vals[j + 1]) else { continue };
        if a * b < 0.0 {
            let (mut lo, mut hi, mut flo) = (grid[j], grid[j + 1], *a);
            for _ in 0..50 {
                let m = 0.5 * (lo + hi);
                let fm = ratio(m)?;
                if fm * flo < 0.0 {
                    hi = m;
                } else {
                    lo = m;
                    flo = fm;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NoOscillation(format!("no bounded phase at y0 = {y0}")))
}

/// Default interface guesses of the first two branches.
pub const BRANCH_GUESS: [f64; 2] = [10.9, 14.7];

/// Sign-changing compacton of `F⁗ = F − 2|F|^{−1/2}F` with `F′(0) = F‴(0) = 0`.
///
/// The interface position `y₀` and phase `s₀` of the two-parameter bundle
/// `F = r⁸ φ(ln r + s₀)` are found by Newton iteration on the two symmetry conditions,
/// seeded near `l_guess` on the bounded phase. Branch `k` has `k` main lobes.
pub fn oscillatory_compacton(
    branch: usize,
    l_guess: Option<f64>,
    opts: &OscillatoryOptions,
) -> Result<CompactonProfile> {
    if !(branch == 1 || branch == 2) {
        return Err(Error::invalid("branch must be 1 or 2"));
    }
    let phi = PeriodicPhi::compute()?;
    let centre = l_guess.unwrap_or(BRANCH_GUESS[branch - 1]);
    if !(centre > 4.0 * opts.interface_offset) {
        return Err(Error::invalid("interface guess must be positive"));
    }
    let s_star = bounded_phase(&phi, centre, opts)?;
    let offsets = [0.0, -0.25, 0.25, -0.5, 0.5, -1.0, 1.0, -1.5, 1.5];
    let mut last_err = None;
    let mut collapsed = false;
    for chunk in offsets.chunks(3) {
        let seeds: Vec<(f64, f64)> = chunk.iter().map(|d| (centre + d, s_star)).collect();
        let found = parallel::map(opts.exec, &seeds, |&seed| newton_oscillatory(&phi, seed, opts));
        for res in found {
            match res {
                Ok((y0, s0, tr, it)) => {
                    // F → −F is the half-period phase shift
                    let (s0, tr) = if tr.y_last()[0] < 0.0 {
                        let s0 = s0 + 0.5 * phi.period;
                        (s0, shoot_oscillatory(&phi, y0, s0, opts)?)
                    } else {
                        (s0, tr)
                    };
                    let c = build_oscillatory(&phi, branch, y0, s0.rem_euclid(phi.period), &tr, it, opts)?;
                    let lobes = c.oscillation.as_ref().map_or(0, |o| o.lobes);
                    if lobes == branch {
                        return Ok(c);
                    }
                    collapsed |= lobes < branch;
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    if collapsed {
        return Err(Error::BranchCollapse(branch));
    }
    Err(last_err.unwrap_or(Error::NewtonDiverged { iterations: opts.max_iter, residual: f64::NAN }))
}

/// Oscillatory component `φ = F / r⁸` against `s = ln r` near the interface.
#[derive(Debug, Clone, Serialize)]
pub struct PhiComponent {
    pub s: Vec<f64>,
    pub phi: Vec<f64>,
    pub period: f64,
    /// Relative sup difference between the last two resolved periods.
    pub periodicity_defect: f64,
}

/// Extracts `φ(s)` on `r = y₀ − y < r_max` and measures its period from zero crossings.
pub fn phi_component(prof: &CompactonProfile, r_max: f64) -> Result<PhiComponent> {
    let (ys, fs): (Vec<f64>, Vec<f64>) = match &prof.source {
        CompactonSource::Numeric { profile, .. } => profile.mesh.iter().zip(&profile.jets).map(|(y, j)| (*y, j[0])).unzip(),
        CompactonSource::Samples { y, big_f } => (y.clone(), big_f.clone()),
        CompactonSource::ClosedForm(_) => {
            return Err(Error::NoOscillation("closed-form compactons do not oscillate".into()))
        }
    };
    let mut pts: Vec<(f64, f64)> = ys
        .iter()
        .zip(&fs)
        .filter(|(y, _)| prof.y0 - **y < r_max && prof.y0 - **y > 0.0)
        .map(|(y, f)| {
            let r = prof.y0 - y;
            (r.ln(), f / r.powi(8))
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (s, phi): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let mut zeros = Vec::new();
    for i in 1..s.len() {
        let (a, b) = (phi[i - 1], phi[i]);
        if a != 0.0 && a * b <= 0.0 {
            zeros.push(s[i - 1] + (s[i] - s[i - 1]) * a / (a - b));
        }
    }
    if zeros.len() < 5 {
        return Err(Error::NoOscillation(format!("{} zero crossings of phi, need 5", zeros.len())));
    }
    let periods: Vec<f64> = zeros.windows(3).map(|w| w[2] - w[0]).collect();
    let period = periods.iter().sum::<f64>() / periods.len() as f64;
    // last two full periods, compared at equal phase
    let n = zeros.len();
    let (a0, a1, a2) = (zeros[n - 5], zeros[n - 3], zeros[n - 1]);
    let interp = |x: f64| -> f64 {
        let k = s.partition_point(|&v| v < x).clamp(1, s.len() - 1);
        let t = (x - s[k - 1]) / (s[k] - s[k - 1]);
        phi[k - 1] + t * (phi[k] - phi[k - 1])
    };
    let m = 200;
    let mut diff = 0.0f64;
    let mut amp = 0.0f64;
    for i in 0..=m {
        let th = i as f64 / m as f64;
        let u = interp(a0 + th * (a1 - a0));
        let v = interp(a1 + th * (a2 - a1));
        diff = diff.max((u - v).abs());
        amp = amp.max(u.abs()).max(v.abs());
    }
    Ok(PhiComponent { s, phi, period, periodicity_defect: diff / amp.max(1e-300) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_peaks_and_support() {
        let k = explicit_compacton(ExplicitKind::K22);
        assert!((k.f(0.0) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(k.f(7.0), 0.0);
        let q = explicit_compacton(ExplicitKind::Quintic);
        assert!((q.f(0.0) - 1.0 / 105.0).abs() < 1e-16);
        assert_eq!(q.big_f(-3.2), 0.0);
    }

    #[test]
    fn series_leading_coefficients() {
        let s = InterfaceSeries::new(&[0.0, 0.0, 0.0, 0.0, 1.0], 2.0, 3).unwrap();
        assert!((s.g[0] - 1.0 / 840.0).abs() < 1e-18);
        let k = InterfaceSeries::new(&[1.0, 0.0, 1.0], 1.0, 3).unwrap();
        assert!((k.g[0] - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn tuned_series_matches_closed_form() {
        let (p, c) = ProbeEquation::TunedQuintic.coefficients(0.0);
        let s = InterfaceSeries::new(&p, c, 12).unwrap();
        let r = 0.3;
        let exact = (r / 2.0f64).sin().powi(8) / 105f64.powi(2);
        assert!((s.state(r)[0] - exact).abs() < 1e-12 * exact);
    }
}
