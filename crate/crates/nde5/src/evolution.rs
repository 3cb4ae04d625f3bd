//! Periodic pseudospectral evolution of the uniformly dispersive equations
//! `u_t = −(1+u²)u_xxxxx` and `u_t = −((1+u²)u_x)_xxxx`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::analysis::gauss_legendre;
use crate::error::{Error, Result};
use crate::models::{fmt16, NdeKind};

/// Edge matching transition width as a fraction of the half-length.
pub const EDGE_FRACTION: f64 = 0.125;
/// Spectral tail required of initial data.
pub const SMOOTH_TAIL: f64 = 1e-8;
/// Spectral tail at which resolution is declared lost.
pub const TAIL_LIMIT: f64 = 1e-3;
/// Gradient growth factor treated as a gradient catastrophe.
pub const BLOWUP_FACTOR: f64 = 1e3;

/// Real field on `N` equispaced points of the periodic domain `[−L, L)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionField {
    pub half_length: f64,
    pub values: Vec<f64>,
    pub t: f64,
    /// Largest imaginary part discarded by the last inverse transform.
    pub imag_residue: f64,
}

impl EvolutionField {
    pub fn new(half_length: f64, values: Vec<f64>, t: f64) -> Result<Self> {
        let n = values.len();
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::invalid("grid size must be a power of two and at least 64"));
        }
        if !(half_length > 0.0) {
            return Err(Error::invalid("half-length must be positive"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(EvolutionField { half_length, values, t, imag_residue: 0.0 })
    }

    pub fn from_fn(half_length: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 2.0 * half_length / n as f64;
        EvolutionField::new(half_length, (0..n).map(|i| f(-half_length + i as f64 * h)).collect(), 0.0)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∂ₓᵐ u` by spectral differentiation of the dealiased spectrum.
    pub fn derivative(&self, order: u32) -> Vec<f64> {
        let sp = Spectral::new(self.n(), self.half_length);
        let mut c = sp.forward(&self.values);
        for (j, cj) in c.iter_mut().enumerate() {
            *cj *= sp.ik(j).powu(order) * if sp.mask[j] { 1.0 } else { 0.0 };
        }
        sp.inverse(&c).0
    }

    /// Largest spectral magnitude in the band just below the dealiasing cutoff, relative
    /// to the peak magnitude.
    pub fn spectral_tail(&self) -> f64 {
        let sp = Spectral::new(self.n(), self.half_length);
        sp.tail(&sp.forward(&self.values))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "u"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt16(self.x(i)), fmt16(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// FFT workspace for one grid.
struct Spectral {
    n: usize,
    dk: f64,
    mask: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(n: usize, half_length: f64) -> Self {
        let mut planner = FftPlanner::new();
        let dk = std::f64::consts::PI / half_length;
        let mask = (0..n).map(|j| 3 * Self::index(j, n).unsigned_abs() as usize <= n && j != n / 2).collect();
        Spectral { n, dk, mask, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn index(j: usize, n: usize) -> i64 {
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    fn k(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            Self::index(j, self.n) as f64 * self.dk
        }
    }

    fn ik(&self, j: usize) -> Complex64 {
        Complex64::new(0.0, self.k(j))
    }

    fn k_max(&self) -> f64 {
        (0..self.n).filter(|&j| self.mask[j]).map(|j| self.k(j).abs()).fold(0.0, f64::max)
    }

    fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut c);
        // the sample grid starts at −L
        let shift = self.n as f64 / 2.0;
        for (j, cj) in c.iter_mut().enumerate() {
            let m = Self::index(j, self.n) as f64;
            *cj *= Complex64::from_polar(1.0, std::f64::consts::TAU * m * shift / self.n as f64);
        }
        c
    }

    /// Real part and the largest discarded imaginary part.
    fn inverse(&self, c: &[Complex64]) -> (Vec<f64>, f64) {
        let shift = self.n as f64 / 2.0;
        let mut d: Vec<Complex64> = c
            .iter()
            .enumerate()
            .map(|(j, cj)| {
                let m = Self::index(j, self.n) as f64;
                cj * Complex64::from_polar(1.0, -std::f64::consts::TAU * m * shift / self.n as f64)
            })
            .collect();
        self.inv.process(&mut d);
        let s = 1.0 / self.n as f64;
        let im = d.iter().fold(0.0f64, |m, z| m.max((z.im * s).abs()));
        (d.iter().map(|z| z.re * s).collect(), im)
    }

    fn apply_mask(&self, c: &mut [Complex64]) {
        for (cj, &keep) in c.iter_mut().zip(&self.mask) {
            if !keep {
                *cj = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn tail(&self, c: &[Complex64]) -> f64 {
        let kc = self.k_max();
        let peak = c.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if peak == 0.0 {
            return 0.0;
        }
        let band = (0..self.n)
            .filter(|&j| self.mask[j] && self.k(j).abs() >= 0.8 * kc)
            .fold(0.0f64, |m, j| m.max(c[j].norm()));
        band / peak
    }
}

/// Data to be mollified.
#[derive(Debug, Clone, PartialEq)]
pub enum StepData {
    /// `sign x`.
    SPlus,
    /// `−sign x`.
    SMinus,
    /// Grid samples on `[−L, L)`.
    Custom(Vec<f64>),
}

/// Grid for mollified data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldTemplate {
    pub half_length: f64,
    pub n: usize,
}

impl Default for FieldTemplate {
    fn default() -> Self {
        FieldTemplate { half_length: 50.0, n: 256 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Mollified {
    pub field: EvolutionField,
    /// Kernel scale `s` of the smoothing `erf(x/s)` (zero when abandoned).
    pub width: f64,
    /// L¹ distance to the data (central window for steps, whole grid for samples).
    pub distance: f64,
    /// Data already smooth and returned unchanged.
    pub abandoned: bool,
}

/// `sign x` on `[−L, L)` with erf matching transitions of scale `L/8` at `±L`.
fn edge_transition(x: f64, l: f64) -> f64 {
    let se = EDGE_FRACTION * l;
    -(libm::erf((x - l) / se) + 1.0) - (libm::erf((x + l) / se) - 1.0)
}

/// Periodic embedding of `sign x` with a sharp jump at the origin.
pub fn embedded_step(x: f64, l: f64) -> f64 {
    let s = if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    };
    s + edge_transition(x, l)
}

/// `∫_{−L/2}^{L/2} |erf(x/s) − sign x| dx`.
fn erf_step_distance(s: f64, l: f64) -> f64 {
    let top = 0.5 * l;
    let end = (12.0 * s).min(top);
    let pieces = 64;
    let mut acc = 0.0;
    for i in 0..pieces {
        let a = end * i as f64 / pieces as f64;
        let b = end * (i + 1) as f64 / pieces as f64;
        acc += gauss_legendre(a, b, |x| libm::erfc(x / s));
    }
    2.0 * acc
}

fn bisect_width(target: f64, lo: f64, hi: f64, dist: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = (a * b).sqrt();
        if dist(m) < target {
            a = m;
        } else {
            b = m;
        }
        if b / a < 1.0 + 1e-13 {
            break;
        }
    }
    (a * b).sqrt()
}

/// Smooth approximation within L¹ distance `δ` of the data, aiming at `3δ/4`.
pub fn mollify(data: &StepData, delta: f64, template: FieldTemplate) -> Result<Mollified> {
    let l = template.half_length;
    if !(delta > 0.0 && delta < l / 10.0) {
        return Err(Error::invalid("mollification needs 0 < delta < L/10"));
    }
    let target = 0.75 * delta;
    match data {
        StepData::SPlus | StepData::SMinus => {
            let sign = if *data == StepData::SPlus { 1.0 } else { -1.0 };
            let s = bisect_width(target, 1e-12 * l, l, |s| erf_step_distance(s, l));
            let field = EvolutionField::from_fn(l, template.n, |x| {
                sign * (libm::erf(x / s) + edge_transition(x, l))
            })?;
            Ok(Mollified { field, width: s, distance: erf_step_distance(s, l), abandoned: false })
        }
        StepData::Custom(v) => {
            let field = EvolutionField::new(l, v.clone(), 0.0)?;
            if field.spectral_tail() < SMOOTH_TAIL {
                return Ok(Mollified { field, width: 0.0, distance: 0.0, abandoned: true });
            }
            let sp = Spectral::new(field.n(), l);
            let c = sp.forward(v);
            let h = field.spacing();
            let smooth = |s: f64| -> Vec<f64> {
                let cs: Vec<Complex64> =
                    c.iter().enumerate().map(|(j, cj)| cj * (-(sp.k(j) * s).powi(2) / 4.0).exp()).collect();
                sp.inverse(&cs).0
            };
            let dist = |s: f64| smooth(s).iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>() * h;
            let s = bisect_width(target, 1e-6 * h, l, dist);
            let out = EvolutionField::new(l, smooth(s), 0.0)?;
            Ok(Mollified { distance: dist(s), field: out, width: s, abandoned: false })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolveOptions {
    /// Constant in `dt ≤ C / ((1 + max u²) k_max⁵)`.
    pub cfl: f64,
    /// Snapshots after the initial one, equally spaced in time.
    pub snapshots: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { cfl: 1.0, snapshots: 1 }
    }
}

/// Largest stable step for the field.
pub fn stable_step(field: &EvolutionField, cfl: f64) -> f64 {
    let sp = Spectral::new(field.n(), field.half_length);
    cfl / ((1.0 + field.max_abs().powi(2)) * sp.k_max().powi(5))
}

/// Integrating-factor RK4 with the exact `−∂ₓ⁵` propagator and 2/3 dealiasing.
pub fn evolve(
    field: &EvolutionField,
    kind: NdeKind,
    t_end: f64,
    dt: Option<f64>,
    opts: EvolveOptions,
) -> Result<Vec<EvolutionField>> {
    if !matches!(kind, NdeKind::UniformNonDiv | NdeKind::UniformDiv) {
        return Err(Error::invalid("evolution is implemented for the uniform equations only"));
    }
    if !(t_end > 0.0) || opts.snapshots == 0 {
        return Err(Error::invalid("t_end must be positive and at least one snapshot requested"));
    }
    let tail0 = field.spectral_tail();
    if tail0 >= SMOOTH_TAIL {
        return Err(Error::invalid(format!("initial data not smooth: spectral tail {tail0:e}")));
    }
    let bound = stable_step(field, opts.cfl);
    let dt = dt.unwrap_or(bound);
    if !(dt > 0.0 && dt <= bound * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("dt = {dt:e} violates the dispersive bound {bound:e}")));
    }
    let per_snap = ((t_end / opts.snapshots as f64) / dt).ceil().max(1.0) as usize;
    let h = t_end / (per_snap * opts.snapshots) as f64;

    let sp = Spectral::new(field.n(), field.half_length);
    let n = field.n();
    let lin: Vec<Complex64> = (0..n).map(|j| -sp.ik(j).powu(5)).collect();
    let e_half: Vec<Complex64> = lin.iter().map(|l| (l * (0.5 * h)).exp()).collect();
    let e_full: Vec<Complex64> = e_half.iter().map(|e| e * e).collect();

    let nonlinear = |c: &[Complex64]| -> Vec<Complex64> {
        let (u, _) = sp.inverse(c);
        let mut out = match kind {
            NdeKind::UniformNonDiv => {
                let d5: Vec<Complex64> = c.iter().enumerate().map(|(j, cj)| cj * sp.ik(j).powu(5)).collect();
                let (u5, _) = sp.inverse(&d5);
                let prod: Vec<f64> = u.iter().zip(&u5).map(|(a, b)| -a * a * b).collect();
                sp.forward(&prod)
            }
            _ => {
                let d1: Vec<Complex64> = c.iter().enumerate().map(|(j, cj)| cj * sp.ik(j)).collect();
                let (u1, _) = sp.inverse(&d1);
                let prod: Vec<f64> = u.iter().zip(&u1).map(|(a, b)| a * a * b).collect();
                let mut f = sp.forward(&prod);
                for (j, fj) in f.iter_mut().enumerate() {
                    *fj *= -sp.ik(j).powu(4);
                }
                f
            }
        };
        sp.apply_mask(&mut out);
        out
    };

    let mut c = sp.forward(&field.values);
    sp.apply_mask(&mut c);
    let grad0 = field.derivative(1).iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut t = field.t;
    let mut out = vec![field.clone()];
    for _ in 0..opts.snapshots {
        for _ in 0..per_snap {
            let k1: Vec<Complex64> = nonlinear(&c).iter().map(|v| v * h).collect();
            let a: Vec<Complex64> = (0..n).map(|j| e_half[j] * (c[j] + 0.5 * k1[j])).collect();
            let k2: Vec<Complex64> = nonlinear(&a).iter().map(|v| v * h).collect();
            let b: Vec<Complex64> = (0..n).map(|j| e_half[j] * c[j] + 0.5 * k2[j]).collect();
            let k3: Vec<Complex64> = nonlinear(&b).iter().map(|v| v * h).collect();
            let d: Vec<Complex64> = (0..n).map(|j| e_full[j] * c[j] + e_half[j] * k3[j]).collect();
            let k4: Vec<Complex64> = nonlinear(&d).iter().map(|v| v * h).collect();
            for j in 0..n {
                c[j] = e_full[j] * c[j] + (e_full[j] * k1[j] + 2.0 * e_half[j] * (k2[j] + k3[j]) + k4[j]) / 6.0;
            }
            sp.apply_mask(&mut c);
            t += h;
            let tail = sp.tail(&c);
            if tail > TAIL_LIMIT {
                return Err(Error::SpectralTailRise { t, fraction: tail });
            }
            let grad = (0..n)
                .map(|j| c[j] * sp.ik(j))
                .collect::<Vec<_>>();
            let g = sp.inverse(&grad).0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !g.is_finite() || g > BLOWUP_FACTOR * grad0 {
                return Err(Error::BlowupDetected(t));
            }
        }
        let (u, im) = sp.inverse(&c);
        out.push(EvolutionField { half_length: field.half_length, values: u, t, imag_residue: im });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShockIndicator {
    pub max_gradient: f64,
    /// L¹ distance over the grid to the periodic embedding of `S₊`.
    pub distance_s_plus: f64,
    pub distance_s_minus: f64,
    pub spectral_tail: f64,
}

pub fn shock_indicator(field: &EvolutionField) -> ShockIndicator {
    let h = field.spacing();
    let l = field.half_length;
    let (mut dp, mut dm) = (0.0, 0.0);
    for (i, v) in field.values.iter().enumerate() {
        let s = embedded_step(field.x(i), l);
        dp += (v - s).abs() * h;
        dm += (v + s).abs() * h;
    }
    ShockIndicator {
        max_gradient: field.derivative(1).iter().fold(0.0, |m, v| m.max(v.abs())),
        distance_s_plus: dp,
        distance_s_minus: dm,
        spectral_tail: field.spectral_tail(),
    }
}
