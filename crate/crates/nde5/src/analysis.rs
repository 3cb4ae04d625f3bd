//! Post-hoc checks: ODE residuals, L¹ convergence rates, total variation,
//! Rankine–Hugoniot algebra and the similarity-level δ-entropy test.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::asymptotics::TailFit;
use crate::error::{Error, Result};
use crate::models::{Jet5, Model, Profile};
use crate::parallel::{self, Exec};

/// Fornberg weights for derivatives `0..=m` at `x0` from the nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Window of `width` consecutive indices around `i`, shifted to fit in `0..n`.
fn stencil(i: usize, n: usize, width: usize) -> std::ops::Range<usize> {
    let half = width / 2;
    let start = i.saturating_sub(half).min(n - width);
    start..start + width
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualReport {
    /// Product-form residual with all derivatives from finite differences of `d0`.
    pub fd_sup: f64,
    pub fd_l2: f64,
    /// Product-form residual from the stored jets, `d5` by differencing `d4`.
    pub jet_sup: f64,
    pub jet_l2: f64,
    /// Hermite–Simpson defect of the stored jets, divided by the step.
    pub collocation_sup: f64,
    pub points: usize,
}

fn sup_l2(v: &[f64]) -> (f64, f64) {
    let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l2 = (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
    (sup, l2)
}

/// Residual of `prof` in the ODE of `model` over the mesh interior.
pub fn residual(model: &Model, prof: &Profile) -> Result<ResidualReport> {
    let p = prof.increasing();
    let n = p.mesh.len();
    if n < 65 {
        return Err(Error::invalid("residual needs at least 64 mesh intervals"));
    }
    let exact = model.with_nu(0.0);
    let interior: Vec<usize> = (4..n - 4).collect();
    let mut fd = Vec::with_capacity(interior.len());
    let mut jet = Vec::with_capacity(interior.len());
    for &i in &interior {
        let z = p.mesh[i];
        let r = stencil(i, n, 9);
        let w = fd_weights(z, &p.mesh[r.clone()], 5);
        let mut d = [0.0; 6];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = r.clone().zip(&w[k]).map(|(j, wk)| wk * p.jets[j][0]).sum();
        }
        fd.push(exact.product_residual(z, &d));
        let r5 = stencil(i, n, 5);
        let w5 = fd_weights(z, &p.mesh[r5.clone()], 1);
        let d5: f64 = r5.zip(&w5[1]).map(|(j, wk)| wk * p.jets[j][4]).sum();
        let j = p.jets[i];
        jet.push(exact.product_residual(z, &[j[0], j[1], j[2], j[3], j[4], d5]));
    }
    let mut coll = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let (za, zb) = (p.mesh[i], p.mesh[i + 1]);
        let h = zb - za;
        let (ya, yb) = (&p.jets[i], &p.jets[i + 1]);
        let node = |z: f64, y: &Jet5| {
            let mut f = model.deriv(z, y);
            if model.at_simple_zero(y) {
                f[4] = model.top_at_zero(z, y);
            }
            f
        };
        let fa = node(za, ya);
        let fb = node(zb, yb);
        let ym: Jet5 = std::array::from_fn(|k| 0.5 * (ya[k] + yb[k]) + h / 8.0 * (fa[k] - fb[k]));
        let fm = model.deriv(za + 0.5 * h, &ym);
        for k in 0..5 {
            coll.push((yb[k] - ya[k]) / h - (fa[k] + 4.0 * fm[k] + fb[k]) / 6.0);
        }
    }
    let (fd_sup, fd_l2) = sup_l2(&fd);
    let (jet_sup, jet_l2) = sup_l2(&jet);
    let (collocation_sup, _) = sup_l2(&coll);
    Ok(ResidualReport { fd_sup, fd_l2, jet_sup, jet_l2, collocation_sup, points: interior.len() })
}

/// Product-form residual of a closed-form solution given its derivatives `d0..d5`.
pub fn closed_form_residual(model: &Model, mesh: &[f64], derivs: impl Fn(f64) -> [f64; 6]) -> (f64, f64) {
    let exact = model.with_nu(0.0);
    let r: Vec<f64> = mesh.iter().map(|&z| exact.product_residual(z, &derivs(z))).collect();
    sup_l2(&r)
}

fn gauss_legendre_8() -> &'static ([f64; 8], [f64; 8]) {
    static GL: OnceLock<([f64; 8], [f64; 8])> = OnceLock::new();
    GL.get_or_init(|| {
        let n = 8;
        let mut x = [0.0; 8];
        let mut w = [0.0; 8];
        for i in 0..n {
            let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, t);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
                let dt = p1 / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, t);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * t * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let d = n as f64 * (t * q1 - q0) / (t * t - 1.0);
                    w[i] = 2.0 / ((1.0 - t * t) * d * d);
                    break;
                }
            }
            x[i] = t;
        }
        (x, w)
    })
}

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre_8();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * x.iter().zip(w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>()
}

/// `g − L = |z|^p [A sin(a₀|z|^q) + B cos(a₀|z|^q)]` on the negative axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailModel {
    pub level: f64,
    pub p: f64,
    pub q: f64,
    pub a0: f64,
    pub a: f64,
    pub b: f64,
}

impl From<TailFit> for TailModel {
    fn from(f: TailFit) -> Self {
        TailModel { level: f.level, p: f.envelope_exponent, q: f.phase_exponent, a0: f.a0, a: f.a, b: f.b }
    }
}

impl TailModel {
    /// Amplitude `R` and phase `φ₀` with `A sin φ + B cos φ = R sin(φ + φ₀)`.
    fn polar(&self) -> (f64, f64) {
        (self.a.hypot(self.b), self.b.atan2(self.a))
    }

    pub fn value(&self, x: f64) -> f64 {
        let ph = self.a0 * x.powf(self.q);
        self.level + x.powf(self.p) * (self.a * ph.sin() + self.b * ph.cos())
    }

    /// Derivative with respect to `x = |z|`.
    pub fn dvalue(&self, x: f64) -> f64 {
        let ph = self.a0 * x.powf(self.q);
        let (s, c) = ph.sin_cos();
        let osc = self.a * s + self.b * c;
        let dosc = (self.a * c - self.b * s) * self.a0 * self.q * x.powf(self.q - 1.0);
        x.powf(self.p) * (self.p / x * osc + dosc)
    }

    /// `x` at which the phase `a₀x^q + φ₀ + shift` equals `kπ`.
    fn node(&self, k: f64, shift: f64) -> f64 {
        let (_, phi0) = self.polar();
        ((k * PI - phi0 - shift) / self.a0).max(0.0).powf(1.0 / self.q)
    }

    fn index_at(&self, x: f64, shift: f64) -> f64 {
        let (_, phi0) = self.polar();
        ((self.a0 * x.powf(self.q) + phi0 + shift) / PI).floor()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Integrand {
    Deficiency,
    Variation,
}

/// An odd profile on the negative axis, optionally continued beyond its
/// mesh by an oscillatory tail.
#[derive(Debug, Clone)]
pub struct ExtendedProfile {
    pub profile: Option<Profile>,
    pub tail: Option<TailModel>,
    /// Below this `z` the tail is used.
    pub join: f64,
    pub level: f64,
}

/// Half-periods integrated individually before switching to the mean value.
const MAX_RESOLVED_HALF_PERIODS: f64 = 2e5;

impl ExtendedProfile {
    /// Negative-side profile (a reflected rarefaction is mapped back) joined to `tail` at `join`.
    pub fn new(prof: &Profile, tail: Option<TailModel>, join: Option<f64>) -> Result<Self> {
        let mut p = prof.increasing();
        let (lo, hi) = p.span();
        if lo >= 0.0 && hi > 0.0 {
            p.mesh = p.mesh.iter().rev().map(|z| -z).collect();
            p.jets = p.jets.iter().rev().map(|j| [j[0], -j[1], j[2], -j[3], j[4]]).collect();
        } else if hi > 1e-12 {
            return Err(Error::invalid("extended profile needs a one-sided mesh ending at the origin"));
        }
        let lo = p.mesh[0];
        let join = join.unwrap_or(lo).clamp(lo, 0.0);
        let level = tail.map(|t| t.level).unwrap_or(p.jets[0][0]);
        Ok(ExtendedProfile { profile: Some(p), tail, join, level })
    }

    /// The tail model alone, on the whole negative axis.
    pub fn pure_tail(tail: TailModel) -> Self {
        ExtendedProfile { profile: None, tail: Some(tail), join: 0.0, level: tail.level }
    }

    /// Largest `|z|` covered.
    pub fn reach(&self) -> f64 {
        if self.tail.is_some() {
            f64::INFINITY
        } else {
            -self.join
        }
    }

    /// `(g, g′)` at `z`, using oddness for `z > 0`.
    pub fn eval(&self, z: f64) -> Result<(f64, f64)> {
        if z > 0.0 {
            let (g, d) = self.eval(-z)?;
            return Ok((-g, d));
        }
        if z >= self.join {
            if let Some(p) = &self.profile {
                let j = p.eval(z)?;
                return Ok((j[0], j[1]));
            }
        }
        match &self.tail {
            Some(t) => Ok((t.value(-z), -t.dvalue(-z))),
            None => Err(Error::InsufficientTail(format!("z = {z} beyond the mesh"))),
        }
    }

    fn integrand(&self, z: f64, what: Integrand) -> f64 {
        match self.eval(z) {
            Ok((g, d)) => match what {
                Integrand::Deficiency => (g - self.level).abs(),
                Integrand::Variation => d.abs(),
            },
            Err(_) => 0.0,
        }
    }

    /// `∫_{−Z}^{0}` of `|g − level|` or `|g′|`.
    fn abs_integral(&self, zmax: f64, what: Integrand) -> Result<f64> {
        if zmax > self.reach() * (1.0 + 1e-12) {
            return Err(Error::InsufficientTail(format!("|z| = {zmax} beyond the covered {}", self.reach())));
        }
        let mut total = 0.0;
        if let Some(p) = &self.profile {
            let lo = (-zmax).max(self.join);
            for w in p.mesh.windows(2) {
                let (a, b) = (w[0].max(lo), w[1]);
                if b > a && b <= 0.0 {
                    total += gauss_legendre(a, b, |z| self.integrand(z, what));
                }
            }
        }
        let xs = -self.join;
        if zmax > xs {
            let t = self.tail.expect("reach checked");
            total += self.tail_integral(&t, xs, zmax, what);
        }
        Ok(total)
    }

    fn tail_integral(&self, t: &TailModel, x0: f64, x1: f64, what: Integrand) -> f64 {
        let shift = if what == Integrand::Variation { PI / 2.0 } else { 0.0 };
        let f = |x: f64| match what {
            Integrand::Deficiency => (t.value(x) - t.level).abs(),
            Integrand::Variation => t.dvalue(x).abs(),
        };
        let mut total = 0.0;
        let mut a = x0.max(1e-300);
        let mut k = t.index_at(a, shift) + 1.0;
        let kmax = t.index_at(x1, shift);
        let k_far = k + MAX_RESOLVED_HALF_PERIODS;
        while k <= kmax.min(k_far) {
            let b = t.node(k, shift).min(x1);
            if b > a {
                total += gauss_legendre(a, b, f);
                a = b;
            }
            k += 1.0;
        }
        if kmax > k_far {
            // remaining half-periods by their mean, |sin| averaging to 2/π
            let (r, _) = t.polar();
            total += match what {
                Integrand::Deficiency => 2.0 / PI * r * (x1.powf(t.p + 1.0) - a.powf(t.p + 1.0)) / (t.p + 1.0),
                Integrand::Variation => {
                    let e = t.p + t.q;
                    2.0 / PI * r * t.a0 * t.q * (x1.powf(e) - a.powf(e)) / e
                }
            };
        } else if x1 > a {
            total += gauss_legendre(a, x1, f);
        }
        total
    }

    /// `∫_{−Z}^{0} |g − level| dz`.
    pub fn deficiency(&self, zmax: f64) -> Result<f64> {
        self.abs_integral(zmax, Integrand::Deficiency)
    }

    /// `∫_{−Z}^{0} |g′| dz`.
    pub fn variation(&self, zmax: f64) -> Result<f64> {
        self.abs_integral(zmax, Integrand::Variation)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub quantity: String,
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    /// RMS deviation of `ln value` from the fitted line.
    pub fit_residual: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_power(quantity: &str, xs: &[f64], ys: &[f64]) -> Result<RateReport> {
    if xs.len() != ys.len() || xs.len() < 5 {
        return Err(Error::DegenerateFit("need at least 5 samples".into()));
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x.abs()), b.max(x.abs())));
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 - 1e-9 {
        return Err(Error::DegenerateFit("samples must span at least 1.5 decades".into()));
    }
    if ys.iter().any(|y| !(y.abs() > 1e-300) || !y.is_finite()) {
        return Err(Error::DegenerateFit("vanishing or non-finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.abs().ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let res = (lx.iter().zip(&ly).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateReport {
        quantity: quantity.into(),
        abscissae: xs.to_vec(),
        values: ys.to_vec(),
        exponent: slope,
        fit_residual: res,
    })
}

/// `‖u₋(·,t) − S₋‖_{L¹(−l,l)}` for `u₋ = g(x/(−t)^{1/5})`, fitted against `−t`.
pub fn l1_rate(ext: &ExtendedProfile, l: f64, ts: &[f64]) -> Result<RateReport> {
    if !(l > 0.0) || ts.iter().any(|t| !(*t < 0.0)) {
        return Err(Error::invalid("l1_rate needs l > 0 and t < 0"));
    }
    let norms = ts
        .iter()
        .map(|t| {
            let tau = (-t).powf(0.2);
            Ok(2.0 * tau * ext.deficiency(l / tau)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mt: Vec<f64> = ts.iter().map(|t| -t).collect();
    fit_power("l1-distance-to-shock", &mt, &norms)
}

/// Partial total variation `∫_{−Z}^{0} |g′|` against `Z`.
pub fn tv_growth(ext: &ExtendedProfile, zs: &[f64]) -> Result<RateReport> {
    let v = zs.iter().map(|&z| ext.variation(z)).collect::<Result<Vec<f64>>>()?;
    fit_power("partial-total-variation", zs, &v)
}

/// `∫_{−Z}^{0} |g − level|` against `Z`.
pub fn l1_deficiency_growth(ext: &ExtendedProfile, zs: &[f64]) -> Result<RateReport> {
    let v = zs.iter().map(|&z| ext.deficiency(z)).collect::<Result<Vec<f64>>>()?;
    fit_power("l1-deficiency", zs, &v)
}

/// One-sided jets `F₀..F₄` at a jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpJets {
    pub minus: Jet5,
    pub plus: Jet5,
}

/// `(FF′)‴ = F₀F₄ + 4F₁F₃ + 3F₂²`.
pub fn flux_third(j: &Jet5) -> f64 {
    j[0] * j[4] + 4.0 * j[1] * j[3] + 3.0 * j[2] * j[2]
}

/// Shock speed `λ = [(FF′)‴]/[F]` and the bracket `[(FF′)‴]`.
pub fn rh_speed(j: &JumpJets) -> Result<(f64, f64)> {
    let jump = j.plus[0] - j.minus[0];
    if jump == 0.0 || !jump.is_finite() {
        return Err(Error::invalid("no jump: F0 equal on both sides"));
    }
    let bracket = flux_third(&j.plus) - flux_third(&j.minus);
    let lambda = if bracket == 0.0 { 0.0 } else { bracket / jump };
    Ok((lambda, bracket))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShockSide {
    /// `S₋`, deformed by shifting the blow-up time.
    SMinusBlowup,
    /// `S₊`, deformed by shifting the rarefaction time.
    SPlusRiemann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Entropy,
    NonEntropy,
}

/// Space-time window `|x| ≤ x_max`, `0 < |t| ≤ t_max` on the side of the shock time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub x_max: f64,
    pub t_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window { x_max: 1.0, t_max: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub side: ShockSide,
    pub verdict: Verdict,
    pub deltas: Vec<f64>,
    pub distances: Vec<f64>,
    /// Fitted `θ` in `distance ∝ δ^θ`.
    pub exponent: f64,
}

/// Points per unit `z` for the spatial integrals.
const Z_PANELS_PER_UNIT: f64 = 4.0;
/// Time panels per decade of `|t|`.
const T_PANELS_PER_DECADE: usize = 6;

/// `∫_0^{X} |u(x) − v(x)| dx` with `u = g(−x/τ₁)`, `v` either `g(−x/τ₂)` or the level.
fn spatial_distance(ext: &ExtendedProfile, x_max: f64, tau1: f64, tau2: Option<f64>) -> Result<f64> {
    let z_span = x_max / tau1.min(tau2.unwrap_or(f64::INFINITY));
    if z_span > ext.reach() {
        return Err(Error::InsufficientTail(format!("window needs |z| up to {z_span}")));
    }
    let panels = ((z_span * Z_PANELS_PER_UNIT).ceil() as usize).max(8);
    let h = x_max / panels as f64;
    let f = |x: f64| {
        let u = ext.eval(-x / tau1).map(|v| v.0).unwrap_or(f64::NAN);
        let v = match tau2 {
            Some(t2) => ext.eval(-x / t2).map(|v| v.0).unwrap_or(f64::NAN),
            None => ext.level,
        };
        (u - v).abs()
    };
    let s: f64 = (0..panels).map(|i| gauss_legendre(i as f64 * h, (i + 1) as f64 * h, f)).sum();
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::InsufficientTail("profile not evaluable in the window".into()))
    }
}

/// `∫_{t_lo}^{t_max} F(s) ds` on panels graded geometrically towards `t_lo`.
fn time_integral(t_lo: f64, t_max: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let decades = (t_max / t_lo).log10().max(1.0);
    let n = (decades * T_PANELS_PER_DECADE as f64).ceil() as usize;
    let r = (t_max / t_lo).powf(1.0 / n as f64);
    let (x, w) = gauss_legendre_8();
    let mut total = 0.0;
    let mut a = t_lo;
    for _ in 0..n {
        let b = a * r;
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in x.iter().zip(w) {
            total += h * wi * f(c + h * xi)?;
        }
        a = b;
    }
    Ok(total)
}

/// Space-time distance of the δ-deformed orbit, for one δ.
pub fn deformation_distance(side: ShockSide, ext: &ExtendedProfile, delta: f64, window: Window) -> Result<f64> {
    let xm = window.x_max;
    match side {
        ShockSide::SMinusBlowup => {
            // ∬ |g(x/(−t)^{1/5}) − g(x/(δ−t)^{1/5})| over t ∈ [−t_max, 0); the strip
            // |t| < 1e-4·δ is dropped, its share is below 4e-4·δ·level·x_max
            let t_lo = (delta * 1e-4).min(window.t_max * 1e-4);
            let main = time_integral(t_lo, window.t_max, |s| {
                spatial_distance(ext, xm, s.powf(0.2), Some((s + delta).powf(0.2)))
            })?;
            Ok(2.0 * main)
        }
        ShockSide::SPlusRiemann => {
            // ∬ |g₊(x/(t+δ)^{1/5}) − S₊(x)|, t ∈ [0, t_max]
            let f = |s: f64| spatial_distance(ext, xm, (s + delta).powf(0.2), None);
            let t_lo = (delta * 1e-3).min(window.t_max * 1e-3);
            let head = gauss_legendre(0.0, t_lo, |s| f(s).unwrap_or(f64::NAN));
            if !head.is_finite() {
                return Err(Error::InsufficientTail("window needs |z| beyond the profile".into()));
            }
            Ok(2.0 * (head + time_integral(t_lo, window.t_max, f)?))
        }
    }
}

/// δ-entropy verdict from the distance curve over `deltas`.
pub fn delta_entropy_test(
    side: ShockSide,
    ext: &ExtendedProfile,
    deltas: &[f64],
    window: Window,
    exec: Exec,
) -> Result<EntropyReport> {
    if deltas.is_empty() {
        return Err(Error::invalid("empty δ list"));
    }
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid("δ must be positive"));
    }
    let mut ds = deltas.to_vec();
    ds.sort_by(f64::total_cmp);
    let dist = parallel::map(exec, &ds, |&d| deformation_distance(side, ext, d, window))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let exponent = if ds.len() >= 2 {
        let n = ds.len() as f64;
        let lx: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
        let ly: Vec<f64> = dist.iter().map(|d| d.max(1e-300).ln()).collect();
        let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    let span_decades = (ds[ds.len() - 1] / ds[0]).log10();
    let decreasing = dist.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9));
    let (first, last) = (dist[0], dist[dist.len() - 1]);
    let verdict = match side {
        ShockSide::SMinusBlowup => {
            if span_decades >= 3.0 - 1e-9 && exponent > 0.05 && decreasing {
                Verdict::Entropy
            } else {
                Verdict::NonEntropy
            }
        }
        ShockSide::SPlusRiemann => {
            if first > 0.5 * last && !(exponent > 0.05) {
                Verdict::NonEntropy
            } else {
                Verdict::Entropy
            }
        }
    };
    Ok(EntropyReport { side, verdict, deltas: ds, distances: dist, exponent })
}

/// Whether `−g` solves the equation as well as `g` (residuals within 2×).
pub fn uniform_nde_symmetry_check(model: &Model, prof: &Profile) -> Result<bool> {
    let r = residual(model, prof)?;
    let mut neg = prof.clone();
    for j in neg.jets.iter_mut() {
        for v in j.iter_mut() {
            *v = -*v;
        }
    }
    let rn = residual(model, &neg)?;
    let scale = prof.jets.iter().fold(0.0f64, |m, j| m.max(j[0].abs()));
    let floor = 1e-12 * (1.0 + scale);
    Ok(rn.jet_sup <= 2.0 * r.jet_sup + floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[2][0] - 1.0).abs() < 1e-14 && (w[2][1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        let v = gauss_legendre(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn rh_examples() {
        let (l, r) = rh_speed(&JumpJets { minus: [1.0, 0.0, 0.0, 0.0, 0.0], plus: [-1.0, 0.0, 0.0, 0.0, 0.0] }).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(r, 0.0);
        let (l, r) = rh_speed(&JumpJets { minus: [1.0; 5], plus: [2.0, 0.0, 0.0, 0.0, 1.0] }).unwrap();
        assert_eq!(r, -6.0);
        assert_eq!(l, -6.0);
        assert!(rh_speed(&JumpJets { minus: [1.0; 5], plus: [1.0, 0.0, 0.0, 0.0, 0.0] }).is_err());
    }

    #[test]
    fn fit_power_needs_span() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(fit_power("q", &xs, &xs).is_err());
        let xs: Vec<f64> = (0..6).map(|k| 10f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.7)).collect();
        assert!((fit_power("q", &xs, &ys).unwrap().exponent - 0.7).abs() < 1e-12);
    }
}
