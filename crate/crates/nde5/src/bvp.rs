//! Collocation Newton solver for the similarity ODEs on a truncated domain
//! `[−L, 0]` with asymptotic closures at `−L`.
//!
//! The first-order system is discretized by Hermite–Simpson (Lobatto IIIA)
//! collocation, fourth order, with `5(N+1)` unknowns on `N` intervals.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::models::{Jet5, Model, Profile, SimilarityParams};
use crate::parallel::{self, Exec};
use crate::poly::roots;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LeftClosure {
    /// `d0 = c`, `d1 = d2 = 0`.
    FixConstant(f64),
    /// Value, slope and curvature of `C₀|z|^p`.
    AlgebraicTail { c0: f64, exponent: f64 },
    /// Growing modes of the linearization about the local background
    /// `d0·|z/z_L|^p` removed.
    OscillatoryDamped { exponent: f64 },
}

impl LeftClosure {
    pub fn name(&self) -> &'static str {
        match self {
            LeftClosure::FixConstant(_) => "fix-constant",
            LeftClosure::AlgebraicTail { .. } => "algebraic-tail",
            LeftClosure::OscillatoryDamped { .. } => "oscillatory-damped",
        }
    }
}

/// Number of modes growing towards `−∞` for the model's far field.
pub fn growing_modes(model: &Model) -> usize {
    match model {
        Model::Shock { .. } | Model::Blowup { .. } => 1,
        Model::Global { .. } => 2,
    }
}

/// Mesh on `[−L, 0]` clustered towards the origin: `z = −L sinh(κs)/sinh(κ)`.
pub fn graded_mesh(length: f64, intervals: usize, grading: f64) -> Result<Vec<f64>> {
    if !(length > 0.0) || intervals < 1 || !(grading >= 0.0) {
        return Err(Error::invalid("graded mesh needs L > 0, N >= 1 and grading >= 0"));
    }
    let map = |s: f64| {
        if grading < 1e-12 {
            s
        } else {
            (grading * s).sinh() / grading.sinh()
        }
    };
    let mut m: Vec<f64> = (0..=intervals).map(|i| -length * map(1.0 - i as f64 / intervals as f64)).collect();
    m[0] = -length;
    m[intervals] = 0.0;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive backtracking rejections tolerated in one iteration.
    pub max_rejections: usize,
    pub armijo: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-4, max_iter: 60, max_rejections: 20, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct BvpSpec {
    pub model: Model,
    pub length: f64,
    pub left: LeftClosure,
    /// Prescribed `d_k(0)`.
    pub origin: [Option<f64>; 5],
    pub mesh: Vec<f64>,
    pub newton: NewtonOptions,
    pub exec: Exec,
}

pub const DEFAULT_LENGTH: f64 = 100.0;
pub const DEFAULT_INTERVALS: usize = 2000;
pub const DEFAULT_GRADING: f64 = 1.5;

impl BvpSpec {
    pub fn new(model: Model, length: f64, left: LeftClosure, origin: [Option<f64>; 5]) -> Result<Self> {
        let mesh = graded_mesh(length, DEFAULT_INTERVALS, DEFAULT_GRADING)?;
        let s = BvpSpec { model, length, left, origin, mesh, newton: NewtonOptions::default(), exec: Exec::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn with_mesh(mut self, intervals: usize, grading: f64) -> Result<Self> {
        self.mesh = graded_mesh(self.length, intervals, grading)?;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.newton.tol = tol;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn left_conditions(&self) -> usize {
        match self.left {
            LeftClosure::FixConstant(_) | LeftClosure::AlgebraicTail { .. } => 3,
            LeftClosure::OscillatoryDamped { .. } => growing_modes(&self.model),
        }
    }

    pub fn origin_conditions(&self) -> usize {
        self.origin.iter().filter(|v| v.is_some()).count()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::invalid("domain length L must be positive"));
        }
        if self.mesh.len() < 65 {
            return Err(Error::invalid("mesh needs N >= 64 intervals"));
        }
        if self.mesh.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("mesh must be strictly increasing"));
        }
        if (self.mesh[0] + self.length).abs() > 1e-12 * self.length || self.mesh[self.mesh.len() - 1] != 0.0 {
            return Err(Error::invalid("mesh must span [-L, 0]"));
        }
        let total = self.left_conditions() + self.origin_conditions();
        if total != 5 {
            return Err(Error::invalid(format!(
                "{} left + {} origin conditions = {total}, expected 5",
                self.left_conditions(),
                self.origin_conditions()
            )));
        }
        if self.origin.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("origin conditions must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub profile: Profile,
    pub iterations: usize,
    pub residual: f64,
    pub condition_estimate: f64,
}

const N: usize = 5;

fn jet(y: &[f64]) -> Jet5 {
    [y[0], y[1], y[2], y[3], y[4]]
}

/// Hermite–Simpson defect on `[za, zb]`, divided by the step. With `zero_end`
/// the right node sits on a prescribed simple zero of a degenerate model.
fn defect(model: &Model, za: f64, zb: f64, ya: &Jet5, yb: &Jet5, zero_end: bool) -> Jet5 {
    let h = zb - za;
    let fa = model.deriv(za, ya);
    let mut fb = model.deriv(zb, yb);
    if zero_end {
        fb[4] = model.top_at_zero(zb, yb);
    }
    let mut ym = [0.0; N];
    for k in 0..N {
        ym[k] = 0.5 * (ya[k] + yb[k]) + h / 8.0 * (fa[k] - fb[k]);
    }
    let fm = model.deriv(za + 0.5 * h, &ym);
    let mut d = [0.0; N];
    for k in 0..N {
        d[k] = (yb[k] - ya[k]) / h - (fa[k] + 4.0 * fm[k] + fb[k]) / 6.0;
    }
    d
}

/// Background derivatives of `d0·|z/z_L|^p` at `z_L`.
fn background(d0: f64, z: f64, p: f64) -> Jet5 {
    let mut out = [d0, 0.0, 0.0, 0.0, 0.0];
    let mut c = d0;
    for k in 1..N {
        c *= (p - (k - 1) as f64) / z;
        out[k] = c;
    }
    out
}

/// Left eigenvectors of the frozen companion matrix for roots with `Re λ < 0`.
fn growing_left_vectors(model: &Model, z: f64, base: &Jet5) -> Result<Vec<([Complex64; N], bool)>> {
    let c = model.top_gradient(z, base);
    let coeffs: Vec<Complex64> = [-c[0], -c[1], -c[2], -c[3], -c[4], 1.0].iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let rts = roots(&coeffs)?;
    let scale = rts.iter().fold(0.0f64, |m, r| m.max(r.norm())).max(1e-300);
    let mut out = Vec::new();
    for lam in rts {
        if lam.re < -1e-9 * scale && lam.im >= -1e-12 * scale {
            let one = Complex64::new(1.0, 0.0);
            let w3 = lam - c[4];
            let w2 = lam * w3 - c[3];
            let w1 = lam * w2 - c[2];
            let w0 = lam * w1 - c[1];
            out.push(([w0, w1, w2, w3, one], lam.im.abs() > 1e-9 * scale));
        }
    }
    Ok(out)
}

struct System<'a> {
    spec: &'a BvpSpec,
    nl: usize,
    origin_zero: bool,
}

impl<'a> System<'a> {
    fn dim(&self) -> usize {
        N * self.spec.mesh.len()
    }

    fn zero_end(&self, interval: usize) -> bool {
        interval + 2 == self.spec.mesh.len() && self.origin_zero
    }

    fn left_rows(&self, y0: &Jet5) -> Result<Vec<f64>> {
        let z = self.spec.mesh[0];
        Ok(match self.spec.left {
            LeftClosure::FixConstant(c) => vec![y0[0] - c, y0[1], y0[2]],
            LeftClosure::AlgebraicTail { c0, exponent: p } => {
                let l = -z;
                let v = c0 * l.powf(p);
                let b = background(v, z, p);
                vec![y0[0] - b[0], y0[1] - b[1], y0[2] - b[2]]
            }
            LeftClosure::OscillatoryDamped { exponent: p } => {
                let b = background(y0[0], z, p);
                let ws = growing_left_vectors(&self.spec.model, z, &b)?;
                let mut rows = Vec::new();
                for (w, complex) in ws {
                    let s: Complex64 = (1..N).map(|k| w[k] * (y0[k] - b[k])).sum();
                    rows.push(s.re);
                    if complex {
                        rows.push(s.im);
                    }
                }
                if rows.len() != self.nl {
                    return Err(Error::invalid(format!(
                        "closure at z = {z} found {} growing directions, expected {}",
                        rows.len(),
                        self.nl
                    )));
                }
                rows
            }
        })
    }

    fn residual(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mesh = &self.spec.mesh;
        let m = mesh.len();
        let mut r = Vec::with_capacity(self.dim());
        r.extend(self.left_rows(&jet(&y[0..N]))?);
        let blocks: Vec<usize> = (0..m - 1).collect();
        let defects = parallel::map(self.spec.exec, &blocks, |&i| {
            defect(&self.spec.model, mesh[i], mesh[i + 1], &jet(&y[N * i..]), &jet(&y[N * (i + 1)..]), self.zero_end(i))
        });
        for d in defects {
            r.extend_from_slice(&d);
        }
        let yl = &y[N * (m - 1)..];
        for (k, v) in self.spec.origin.iter().enumerate() {
            if let Some(v) = v {
                r.push(yl[k] - v);
            }
        }
        Ok(r)
    }

    fn jacobian(&self, y: &[f64]) -> Result<BandMatrix> {
        let mesh = &self.spec.mesh;
        let m = mesh.len();
        let n = self.dim();
        let mut a = BandMatrix::zeros(n, 2 * N - 1, 2 * N - 1);
        let fd = |v: f64| 1e-7 * (1.0 + v.abs());
        let y0 = jet(&y[0..N]);
        let base = self.left_rows(&y0)?;
        for k in 0..N {
            let mut yp = y0;
            let h = fd(y0[k]);
            yp[k] += h;
            let rp = self.left_rows(&yp)?;
            for (row, (p, b)) in rp.iter().zip(&base).enumerate() {
                a.set(row, k, (p - b) / h);
            }
        }
        let blocks: Vec<usize> = (0..m - 1).collect();
        let cols = parallel::map(self.spec.exec, &blocks, |&i| {
            let (za, zb) = (mesh[i], mesh[i + 1]);
            let ya = jet(&y[N * i..]);
            let yb = jet(&y[N * (i + 1)..]);
            let ze = self.zero_end(i);
            let d0 = defect(&self.spec.model, za, zb, &ya, &yb, ze);
            let mut block = [[0.0; 2 * N]; N];
            for c in 0..2 * N {
                let (mut pa, mut pb) = (ya, yb);
                let h = if c < N {
                    let h = fd(ya[c]);
                    pa[c] += h;
                    h
                } else {
                    let h = fd(yb[c - N]);
                    pb[c - N] += h;
                    h
                };
                let d = defect(&self.spec.model, za, zb, &pa, &pb, ze);
                for r in 0..N {
                    block[r][c] = (d[r] - d0[r]) / h;
                }
            }
            block
        });
        for (i, block) in cols.iter().enumerate() {
            for r in 0..N {
                for c in 0..2 * N {
                    a.set(self.nl + N * i + r, N * i + c, block[r][c]);
                }
            }
        }
        let mut row = self.nl + N * (m - 1);
        for (k, v) in self.spec.origin.iter().enumerate() {
            if v.is_some() {
                a.set(row, N * (m - 1) + k, 1.0);
                row += 1;
            }
        }
        Ok(a)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Interpolates the guess onto the mesh. Outside its span the nearest end value
/// of `d0` is used with zero derivatives.
pub fn guess_on_mesh(guess: &Profile, mesh: &[f64]) -> Vec<f64> {
    let (lo, hi) = guess.span();
    let inc = guess.increasing();
    let first = inc.jets[0];
    let last = inc.jets[inc.jets.len() - 1];
    let mut y = Vec::with_capacity(N * mesh.len());
    for &z in mesh {
        let j = if z < lo {
            [first[0], 0.0, 0.0, 0.0, 0.0]
        } else if z > hi {
            [last[0], 0.0, 0.0, 0.0, 0.0]
        } else {
            inc.eval(z).unwrap_or(first)
        };
        y.extend_from_slice(&j);
    }
    y
}

pub fn solve_bvp(spec: &BvpSpec, guess: &Profile) -> Result<BvpSolution> {
    spec.validate()?;
    let y0 = guess_on_mesh(guess, &spec.mesh);
    solve_from(spec, y0)
}

fn solve_from(spec: &BvpSpec, mut y: Vec<f64>) -> Result<BvpSolution> {
    let origin_zero = spec.model.is_degenerate() && spec.origin[0] == Some(0.0) && spec.origin[1].is_some_and(|v| v != 0.0);
    let sys = System { spec, nl: spec.left_conditions(), origin_zero };
    let opts = spec.newton;
    let mut r = sys.residual(&y)?;
    let mut cond = f64::NAN;
    let mut iterations = 0;
    while inf_norm(&r) > opts.tol || iterations == 0 {
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let lu = sys.jacobian(&y)?.factor()?;
        cond = lu.pivot_ratio;
        let step = lu.solve(&r);
        let f0 = l2(&r);
        let mut lambda = 1.0;
        let mut rejections = 0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a - lambda * s).collect();
            let accepted = match sys.residual(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) && l2(&rt) <= (1.0 - opts.armijo * lambda) * f0 => {
                    y = trial;
                    r = rt;
                    true
                }
                _ => false,
            };
            if accepted {
                break;
            }
            rejections += 1;
            if rejections >= opts.max_rejections {
                return Err(Error::NewtonDiverged { iterations, residual: inf_norm(&r) });
            }
            lambda *= 0.5;
        }
        let step_norm = lambda * inf_norm(&step);
        if inf_norm(&r) <= opts.tol && step_norm <= 1e-10 * (1.0 + inf_norm(&y)) {
            break;
        }
        if inf_norm(&r) <= 1e-3 * opts.tol {
            break;
        }
    }
    let res = inf_norm(&r);
    if !(res < 10.0 * opts.tol) {
        return Err(Error::NewtonDiverged { iterations, residual: res });
    }
    let jets: Vec<Jet5> = y.chunks(N).map(jet).collect();
    let mut prov = BTreeMap::new();
    prov.insert("solver".into(), json!("bvp-hermite-simpson"));
    prov.insert("length".into(), json!(spec.length));
    prov.insert("intervals".into(), json!(spec.mesh.len() - 1));
    prov.insert("closure".into(), json!(spec.left));
    prov.insert("newton_iterations".into(), json!(iterations));
    prov.insert("residual".into(), json!(res));
    prov.insert("nu".into(), json!(spec.model.nu()));
    let profile = Profile::new(spec.model.profile_kind(), spec.model.params(), spec.mesh.clone(), jets, prov)?;
    Ok(BvpSolution { profile, iterations, residual: res, condition_estimate: cond })
}

/// Natural-parameter continuation along `path`; stops at the first failure.
#[derive(Debug)]
pub struct Continuation {
    pub solutions: Vec<BvpSolution>,
    pub failure: Option<(usize, Error)>,
}

pub fn continuation<P>(path: &[P], make: impl Fn(&P) -> Result<BvpSpec>, guess: &Profile) -> Continuation {
    let mut solutions: Vec<BvpSolution> = Vec::new();
    for (i, p) in path.iter().enumerate() {
        let prev = solutions.last().map(|s| &s.profile).unwrap_or(guess);
        let res = make(p).and_then(|spec| solve_bvp(&spec, prev));
        match res {
            Ok(s) => solutions.push(s),
            Err(e) => return Continuation { solutions, failure: Some((i, e)) },
        }
    }
    Continuation { solutions, failure: None }
}

/// Shock profile guess: the origin series near zero blended into the constant `level`.
pub fn shock_guess(c: f64, d: f64, level: f64, length: f64) -> Result<Profile> {
    let mesh = graded_mesh(length, 400, 0.0)?;
    let z1 = (level / c.abs()).max(0.5);
    let jets = mesh
        .iter()
        .map(|&z| {
            let w = smooth_step(-z / z1);
            let near = [c * z + d * z.powi(3), c + 3.0 * d * z * z, 6.0 * d * z, 6.0 * d, 0.0];
            let mut j = [0.0; 5];
            for k in 0..5 {
                j[k] = (1.0 - w) * near[k];
            }
            j[0] += w * level;
            j
        })
        .collect();
    Profile::new(
        crate::models::ProfileKind::Shock(crate::models::NdeKind::N50),
        crate::models::SimilarityParams::riemann(),
        mesh,
        jets,
        BTreeMap::new(),
    )
}

/// Global profile with `F(0) = f0`, `F′(0) = f1` and far field `C₀|y|^{α/β}`,
/// started from `(f0⁴ + (C₀|y|^{α/β})⁴)^{1/4} + f1·y·eʸ`.
pub fn solve_global(params: SimilarityParams, f0: f64, f1: f64, length: f64, intervals: usize, tol: f64) -> Result<BvpSolution> {
    let model = crate::models::rhs_global(params);
    let p = params.tail_exponent();
    let c0 = params.c0;
    let spec = BvpSpec::new(model, length, LeftClosure::AlgebraicTail { c0, exponent: p }, [Some(f0), Some(f1), None, None, None])?
        .with_mesh(intervals, DEFAULT_GRADING)?
        .with_tol(tol);
    let mesh = graded_mesh(length, 400, 0.0)?;
    let jets = mesh
        .iter()
        .map(|&y| [(f0.powi(4) + (c0 * y.abs().powf(p)).powi(4)).powf(0.25) + f1 * y * y.exp(), 0.0, 0.0, 0.0, 0.0])
        .collect();
    let mut prov = BTreeMap::new();
    prov.insert("method".into(), json!("algebraic guess"));
    let guess = Profile::new(model.profile_kind(), params, mesh, jets, prov)?;
    solve_bvp(&spec, &guess)
}

fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{rhs_global, SimilarityParams};

    #[test]
    fn mesh_is_graded_towards_origin() {
        let m = graded_mesh(100.0, 100, 2.0).unwrap();
        assert_eq!(m[0], -100.0);
        assert_eq!(m[100], 0.0);
        assert!(m[1] - m[0] > m[100] - m[99]);
    }

    #[test]
    fn condition_count_enforced() {
        let model = rhs_global(SimilarityParams::new(1.0 / 9.0, 1.0).unwrap());
        let bad = BvpSpec::new(model, 50.0, LeftClosure::FixConstant(1.0), [Some(5.0), Some(0.0), Some(0.0), Some(0.0), None]);
        assert!(bad.is_err());
        let ok = BvpSpec::new(model, 50.0, LeftClosure::FixConstant(1.0), [Some(5.0), Some(0.0), None, None, None]);
        assert!(ok.is_ok());
    }

    #[test]
    fn background_derivatives() {
        let b = background(2.0, -4.0, 0.5);
        assert!((b[1] - 0.5 * 2.0 / -4.0).abs() < 1e-15);
        assert!((b[2] - 0.5 * -0.5 * 2.0 / 16.0).abs() < 1e-15);
    }
}
