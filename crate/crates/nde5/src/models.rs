//! Similarity ODEs in first-order form, the degeneracy regularization, origin
//! series, scaling and reflection, and the profile container.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Value and first four derivatives at one point.
pub type Jet5 = [f64; 5];

/// Default regularization parameter for `1/g`.
pub const DEFAULT_NU: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NdeKind {
    N50,
    N41,
    N32,
    N23,
    N14,
    UniformDiv,
    UniformNonDiv,
    Time5,
}

impl NdeKind {
    pub const SHOCK_KINDS: [NdeKind; 7] = [
        NdeKind::N50,
        NdeKind::N41,
        NdeKind::N32,
        NdeKind::N23,
        NdeKind::N14,
        NdeKind::UniformDiv,
        NdeKind::UniformNonDiv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NdeKind::N50 => "n50",
            NdeKind::N41 => "n41",
            NdeKind::N32 => "n32",
            NdeKind::N23 => "n23",
            NdeKind::N14 => "n14",
            NdeKind::UniformDiv => "uniform-div",
            NdeKind::UniformNonDiv => "uniform-nondiv",
            NdeKind::Time5 => "time5",
        }
    }

    /// Whether the principal part is `g·g⁽⁵⁾ + ...` (degenerate at `g = 0`).
    pub fn is_degenerate(self) -> bool {
        matches!(self, NdeKind::N50 | NdeKind::N41 | NdeKind::N32 | NdeKind::N23 | NdeKind::N14)
    }

    /// Leibniz weights `(a, b)` of the lower-order products `a·g′g⁗ + b·g″g‴`.
    fn leibniz_weights(self) -> (f64, f64) {
        match self {
            NdeKind::N50 => (0.0, 0.0),
            NdeKind::N41 => (1.0, 0.0),
            NdeKind::N32 => (2.0, 1.0),
            NdeKind::N23 => (3.0, 4.0),
            NdeKind::N14 => (5.0, 10.0),
            _ => (0.0, 0.0),
        }
    }
}

impl fmt::Display for NdeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NdeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "n50" => NdeKind::N50,
            "n41" => NdeKind::N41,
            "n32" => NdeKind::N32,
            "n23" => NdeKind::N23,
            "n14" => NdeKind::N14,
            "uniform-div" => NdeKind::UniformDiv,
            "uniform-nondiv" => NdeKind::UniformNonDiv,
            "time5" => NdeKind::Time5,
            other => return Err(Error::invalid(format!("unknown kind '{other}'"))),
        })
    }
}

/// Similarity exponents `(α, β = (1+α)/5)` and far-field amplitude `C₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    pub alpha: f64,
    pub beta: f64,
    pub c0: f64,
}

impl SimilarityParams {
    pub fn new(alpha: f64, c0: f64) -> Result<Self> {
        if !alpha.is_finite() || !c0.is_finite() || alpha <= -1.0 {
            return Err(Error::invalid("alpha must be finite and > -1, c0 finite"));
        }
        Ok(SimilarityParams { alpha, beta: (1.0 + alpha) / 5.0, c0 })
    }

    /// Exponent `α/β` of the algebraic far field `C₀|y|^{α/β}`.
    pub fn tail_exponent(&self) -> f64 {
        self.alpha / self.beta
    }

    /// Parameters of the Riemann (shock) problem.
    pub fn riemann() -> Self {
        SimilarityParams { alpha: 0.0, beta: 0.2, c0: 1.0 }
    }
}

/// `1/g` replaced by `sign(g)/√(ν² + g²)`; `ν = 0` gives the plain reciprocal.
pub fn regularized_inverse(g: f64, nu: f64) -> f64 {
    if nu == 0.0 {
        1.0 / g
    } else {
        let s = if g > 0.0 {
            1.0
        } else if g < 0.0 {
            -1.0
        } else {
            0.0
        };
        s / (nu * nu + g * g).sqrt()
    }
}

/// The fifth-order similarity ODEs, each solved for its top derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Shock { kind: NdeKind, nu: f64 },
    Blowup { params: SimilarityParams, nu: f64 },
    Global { params: SimilarityParams, nu: f64 },
}

/// Shock-profile ODE of the given kind (similarity variable `z = x/(−t)^{1/5}`).
pub fn rhs_shock(kind: NdeKind, nu: f64) -> Result<Model> {
    if kind == NdeKind::Time5 {
        return Err(Error::invalid("time5 is a phase-plane equation, use rhs_phase_plane"));
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::invalid("nu must be nonnegative"));
    }
    Ok(Model::Shock { kind, nu })
}

/// Blow-up profile ODE `−(ff′)⁗ − βf′y + αf = 0`.
pub fn rhs_blowup(params: SimilarityParams) -> Model {
    Model::Blowup { params, nu: DEFAULT_NU }
}

/// Global (post-blow-up) profile ODE `−(FF′)⁗ + βF′y − αF = 0`.
pub fn rhs_global(params: SimilarityParams) -> Model {
    Model::Global { params, nu: DEFAULT_NU }
}

/// `(g³)⁽⁵⁾/3` from the derivatives `d[0..=5]`, by the multinomial Leibniz rule.
fn cube_fifth_over_three(d: &[f64; 6]) -> f64 {
    const FACT: [f64; 6] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];
    let mut s = 0.0;
    for a in 0..=5 {
        for b in 0..=(5 - a) {
            let c = 5 - a - b;
            s += 120.0 / (FACT[a] * FACT[b] * FACT[c]) * d[a] * d[b] * d[c];
        }
    }
    s / 3.0
}

impl Model {
    pub fn nu(&self) -> f64 {
        match *self {
            Model::Shock { nu, .. } | Model::Blowup { nu, .. } | Model::Global { nu, .. } => nu,
        }
    }

    pub fn with_nu(self, nu: f64) -> Self {
        match self {
            Model::Shock { kind, .. } => Model::Shock { kind, nu },
            Model::Blowup { params, .. } => Model::Blowup { params, nu },
            Model::Global { params, .. } => Model::Global { params, nu },
        }
    }

    pub fn profile_kind(&self) -> ProfileKind {
        match *self {
            Model::Shock { kind, .. } => ProfileKind::Shock(kind),
            Model::Blowup { .. } => ProfileKind::Blowup,
            Model::Global { .. } => ProfileKind::Global,
        }
    }

    pub fn params(&self) -> SimilarityParams {
        match *self {
            Model::Shock { .. } => SimilarityParams::riemann(),
            Model::Blowup { params, .. } | Model::Global { params, .. } => params,
        }
    }

    /// Top derivative `g⁽⁵⁾` at `(z, j)`.
    pub fn top(&self, z: f64, j: &Jet5) -> f64 {
        let [g, g1, g2, g3, g4] = *j;
        match *self {
            Model::Shock { kind, nu } => match kind {
                NdeKind::UniformNonDiv => -0.2 * g1 * z / (1.0 + g * g),
                NdeKind::UniformDiv => {
                    let lower = cube_fifth_over_three(&[g, g1, g2, g3, g4, 0.0]);
                    -(0.2 * g1 * z + lower) / (1.0 + g * g)
                }
                _ => {
                    let (a, b) = kind.leibniz_weights();
                    (-0.2 * g1 * z - a * g1 * g4 - b * g2 * g3) * regularized_inverse(g, nu)
                }
            },
            Model::Blowup { params: p, nu } => {
                (p.alpha * g - p.beta * g1 * z - 5.0 * g1 * g4 - 10.0 * g2 * g3)
                    * regularized_inverse(g, nu)
            }
            Model::Global { params: p, nu } => {
                (p.beta * g1 * z - p.alpha * g - 5.0 * g1 * g4 - 10.0 * g2 * g3)
                    * regularized_inverse(g, nu)
            }
        }
    }

    /// The first-order system `(g′, g″, g‴, g⁗, g⁽⁵⁾)`.
    pub fn deriv(&self, z: f64, j: &Jet5) -> Jet5 {
        [j[1], j[2], j[3], j[4], self.top(z, j)]
    }

    /// Adapter for [`crate::ode_core::IvpSpec`].
    pub fn rhs_fn(self) -> impl Fn(f64, &[f64], &mut [f64]) {
        move |z, y, dy| {
            let j = [y[0], y[1], y[2], y[3], y[4]];
            let d = self.deriv(z, &j);
            dy.copy_from_slice(&d);
        }
    }

    /// Residual of the unexpanded (product) form given `d = (g, …, g⁽⁵⁾)`.
    ///
    /// Shock kinds: `P(g) + zg′/5` with `P` the nonlinear operator, e.g. `(gg′)⁗` for N14.
    /// Blow-up: `−(ff′)⁗ − βf′y + αf`. Global: `−(FF′)⁗ + βF′y − αF`.
    pub fn product_residual(&self, z: f64, d: &[f64; 6]) -> f64 {
        let [g, g1, g2, g3, g4, g5] = *d;
        let ff4 = g * g5 + 5.0 * g1 * g4 + 10.0 * g2 * g3;
        match *self {
            Model::Shock { kind, .. } => match kind {
                NdeKind::UniformNonDiv => (1.0 + g * g) * g5 + 0.2 * z * g1,
                NdeKind::UniformDiv => g5 + cube_fifth_over_three(d) + 0.2 * z * g1,
                _ => {
                    let (a, b) = kind.leibniz_weights();
                    g * g5 + a * g1 * g4 + b * g2 * g3 + 0.2 * z * g1
                }
            },
            Model::Blowup { params: p, .. } => -ff4 - p.beta * g1 * z + p.alpha * g,
            Model::Global { params: p, .. } => -ff4 + p.beta * g1 * z - p.alpha * g,
        }
    }

    /// Factor multiplying `g⁽⁵⁾` in [`Model::product_residual`].
    pub fn principal_coefficient(&self, g: f64) -> f64 {
        match *self {
            Model::Shock { kind: NdeKind::UniformNonDiv | NdeKind::UniformDiv, .. } => 1.0 + g * g,
            Model::Shock { .. } => g,
            Model::Blowup { .. } | Model::Global { .. } => -g,
        }
    }

    /// Whether the principal coefficient vanishes with `g`.
    pub fn is_degenerate(&self) -> bool {
        match *self {
            Model::Shock { kind, .. } => kind.is_degenerate(),
            _ => true,
        }
    }

    /// Whether `j` sits on a simple zero of `g` where [`Model::top_at_zero`] applies.
    pub fn at_simple_zero(&self, j: &Jet5) -> bool {
        self.is_degenerate() && j[1] != 0.0 && j[0].abs() <= 1e-12 * j[1].abs()
    }

    /// Top derivative at a simple zero of `g` on a degenerate model, as the
    /// removable limit `g⁽⁵⁾ = (d/dz) num / g′` where `g⁽⁵⁾ = num/g` away from the zero.
    pub fn top_at_zero(&self, z: f64, j: &Jet5) -> f64 {
        let coef = self.principal_coefficient(1.0);
        let num = |z: f64, j: &Jet5| -self.product_residual(z, &[j[0], j[1], j[2], j[3], j[4], 0.0]) / coef;
        let hz = 1e-6 * (1.0 + z.abs());
        let mut total = (num(z + hz, j) - num(z - hz, j)) / (2.0 * hz);
        let mut d4 = 0.0;
        for k in 0..5 {
            let h = 1e-6 * (1.0 + j[k].abs());
            let (mut a, mut b) = (*j, *j);
            a[k] += h;
            b[k] -= h;
            let dk = (num(z, &a) - num(z, &b)) / (2.0 * h);
            if k < 4 {
                total += dk * j[k + 1];
            } else {
                d4 = dk;
            }
        }
        total / (j[1] - d4)
    }

    /// `∂g⁽⁵⁾/∂(g, …, g⁗)` by central differences.
    pub fn top_gradient(&self, z: f64, j: &Jet5) -> [f64; 5] {
        let mut grad = [0.0; 5];
        for k in 0..5 {
            let h = 1e-6 * (1.0 + j[k].abs());
            let mut a = *j;
            let mut b = *j;
            a[k] += h;
            b[k] -= h;
            grad[k] = (self.top(z, &a) - self.top(z, &b)) / (2.0 * h);
        }
        grad
    }
}

/// Truncated odd-at-the-origin series `Cz + Dz³ + c₅z⁵ + …`.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginSeries {
    pub model: Model,
    pub poly: Poly,
}

impl OriginSeries {
    pub fn coefficient(&self, k: usize) -> f64 {
        self.poly.coeff(k)
    }

    pub fn jet(&self, z: f64) -> Jet5 {
        let mut j = [0.0; 5];
        let mut p = self.poly.clone();
        for v in j.iter_mut() {
            *v = p.eval(z);
            p = p.derivative();
        }
        j
    }

    /// Residual of the product form of the ODE along the truncated series.
    pub fn residual(&self, z: f64) -> f64 {
        let model = self.model.with_nu(0.0);
        let mut d = [0.0; 6];
        let mut p = self.poly.clone();
        for v in d.iter_mut() {
            *v = p.eval(z);
            p = p.derivative();
        }
        model.product_residual(z, &d)
    }
}

/// Product-form residual polynomial of a similarity ODE along the polynomial `g`.
fn residual_poly(model: &Model, g: &Poly) -> Poly {
    let d: Vec<Poly> = (0..=5).map(|k| g.nth_derivative(k)).collect();
    let z = Poly::new(vec![0.0, 1.0]);
    let quad = |a: f64, b: f64| {
        d[0].mul(&d[5]).add(&d[1].mul(&d[4]).scale(a)).add(&d[2].mul(&d[3]).scale(b))
    };
    match *model {
        Model::Shock { kind, .. } => {
            let transport = z.mul(&d[1]).scale(0.2);
            let principal = match kind {
                NdeKind::UniformNonDiv => Poly::new(vec![1.0]).add(&d[0].mul(&d[0])).mul(&d[5]),
                NdeKind::UniformDiv => {
                    let cube = d[0].mul(&d[0]).mul(&d[0]);
                    d[5].add(&cube.nth_derivative(5).scale(1.0 / 3.0))
                }
                _ => {
                    let (a, b) = kind.leibniz_weights();
                    quad(a, b)
                }
            };
            principal.add(&transport)
        }
        Model::Blowup { params: p, .. } => quad(5.0, 10.0)
            .scale(-1.0)
            .add(&z.mul(&d[1]).scale(-p.beta))
            .add(&d[0].scale(p.alpha)),
        Model::Global { params: p, .. } => quad(5.0, 10.0)
            .scale(-1.0)
            .add(&z.mul(&d[1]).scale(p.beta))
            .add(&d[0].scale(-p.alpha)),
    }
}

/// Origin expansion with coefficients beyond `z³` found by matching powers of `z`.
///
/// The series fixes `g(0) = g″(0) = g⁗(0) = 0`, `g′(0) = C`, `g‴(0) = 6D`; every
/// higher coefficient up to `order` is solved from the lowest power of `z` in which it
/// appears (linearly) in the product-form residual.
pub fn series_origin(kind: NdeKind, c: f64, d: f64, order: usize) -> Result<OriginSeries> {
    if kind == NdeKind::Time5 {
        return Err(Error::invalid("series_origin needs a fifth-order shock kind"));
    }
    series_for_model(Model::Shock { kind, nu: 0.0 }, c, d, order)
}

/// [`series_origin`] for any similarity ODE (`D` is `g‴(0)/6`).
pub fn series_for_model(model: Model, c: f64, d: f64, order: usize) -> Result<OriginSeries> {
    if c == 0.0 || !c.is_finite() || !d.is_finite() {
        return Err(Error::invalid("C must be nonzero and finite"));
    }
    if order > 9 {
        return Err(Error::invalid("series order above 9 is not supported"));
    }
    if order < 3 {
        return Err(Error::invalid("series order must be at least 3"));
    }
    let mut coeffs = vec![0.0; order + 1];
    coeffs[1] = c;
    coeffs[3] = d;
    // the principal coefficient at z = 0 is linear in g (degenerate) or constant (uniform)
    let degenerate = !matches!(
        model,
        Model::Shock { kind: NdeKind::UniformDiv | NdeKind::UniformNonDiv, .. }
    );
    let shift = if degenerate { 4 } else { 5 };
    for n in 5..=order {
        let m = n - shift;
        coeffs[n] = 0.0;
        let r0 = residual_poly(&model, &Poly::new(coeffs.clone())).coeff(m);
        coeffs[n] = 1.0;
        let r1 = residual_poly(&model, &Poly::new(coeffs.clone())).coeff(m);
        let slope = r1 - r0;
        if slope.abs() < 1e-300 {
            return Err(Error::invalid(format!("coefficient z^{n} not determined by matching")));
        }
        coeffs[n] = -r0 / slope;
    }
    Ok(OriginSeries { model, poly: Poly::new(coeffs) })
}

/// Which ODE a profile solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    Shock(NdeKind),
    Rarefaction(NdeKind),
    Blowup,
    Global,
    PhasePlane,
    Compacton,
}

impl ProfileKind {
    pub fn label(&self) -> String {
        match self {
            ProfileKind::Shock(k) => format!("shock-{k}"),
            ProfileKind::Rarefaction(k) => format!("rarefaction-{k}"),
            ProfileKind::Blowup => "blowup".into(),
            ProfileKind::Global => "global".into(),
            ProfileKind::PhasePlane => "phase-plane".into(),
            ProfileKind::Compacton => "compacton".into(),
        }
    }
}

/// Jets of a computed profile on a monotone mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    pub params: SimilarityParams,
    pub mesh: Vec<f64>,
    pub jets: Vec<Jet5>,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: ProfileKind,
    params: SimilarityParams,
    provenance: BTreeMap<String, serde_json::Value>,
}

impl Profile {
    pub fn new(
        kind: ProfileKind,
        params: SimilarityParams,
        mesh: Vec<f64>,
        jets: Vec<Jet5>,
        provenance: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self> {
        let p = Profile { kind, params, mesh, jets, provenance };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh.len() != self.jets.len() || self.mesh.len() < 2 {
            return Err(Error::invalid("profile needs at least two mesh points with one jet each"));
        }
        let inc = self.mesh[1] > self.mesh[0];
        if !self.mesh.windows(2).all(|w| if inc { w[1] > w[0] } else { w[1] < w[0] }) {
            return Err(Error::invalid("profile mesh must be strictly monotone"));
        }
        if !self.jets.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::invalid("profile jets must be finite"));
        }
        if self.provenance.is_empty() {
            return Err(Error::invalid("profile provenance must not be empty"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        let (a, b) = (self.mesh[0], *self.mesh.last().unwrap());
        (a.min(b), a.max(b))
    }

    /// Profile with an increasing mesh.
    pub fn increasing(&self) -> Profile {
        let mut p = self.clone();
        if p.mesh[0] > p.mesh[p.mesh.len() - 1] {
            p.mesh.reverse();
            p.jets.reverse();
        }
        p
    }

    pub fn values(&self) -> Vec<f64> {
        self.jets.iter().map(|j| j[0]).collect()
    }

    /// Piecewise Hermite interpolation of the jet (component `k` uses `d_k` and `d_{k+1}`).
    pub fn eval(&self, z: f64) -> Result<Jet5> {
        let (lo, hi) = self.span();
        if !(z >= lo && z <= hi) {
            return Err(Error::OutOfSpan { t: z, lo, hi });
        }
        let inc = self.mesh[0] < self.mesh[self.mesh.len() - 1];
        let k = if inc {
            self.mesh.partition_point(|&s| s < z)
        } else {
            self.mesh.partition_point(|&s| s > z)
        };
        if k < self.mesh.len() && self.mesh[k] == z {
            return Ok(self.jets[k]);
        }
        let (i0, i1) = (k - 1, k);
        let (za, zb) = (self.mesh[i0], self.mesh[i1]);
        let (ja, jb) = (&self.jets[i0], &self.jets[i1]);
        let h = zb - za;
        let s = (z - za) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut out = [0.0; 5];
        for c in 0..4 {
            out[c] = h00 * ja[c] + h10 * h * ja[c + 1] + h01 * jb[c] + h11 * h * jb[c + 1];
        }
        out[4] = (1.0 - s) * ja[4] + s * jb[4];
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["z", "g", "g1", "g2", "g3", "g4"])?;
        for (z, j) in self.mesh.iter().zip(&self.jets) {
            let mut rec = vec![fmt16(*z)];
            rec.extend(j.iter().map(|v| fmt16(*v)));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn sidecar_json(&self) -> Result<String> {
        let s = Sidecar { kind: self.kind, params: self.params, provenance: self.provenance.clone() };
        Ok(serde_json::to_string_pretty(&s)?)
    }

    /// Reads the CSV body and, when given, the JSON sidecar.
    pub fn read_csv<R: Read>(r: R, sidecar: Option<&str>) -> Result<Profile> {
        let mut rd = csv::Reader::from_reader(r);
        let mut mesh = Vec::new();
        let mut jets = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 6 {
                return Err(Error::invalid("profile CSV rows need 6 columns"));
            }
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::invalid(e.to_string())))
                .collect::<Result<_>>()?;
            mesh.push(v[0]);
            jets.push([v[1], v[2], v[3], v[4], v[5]]);
        }
        let (kind, params, provenance) = match sidecar {
            Some(s) => {
                let sc: Sidecar = serde_json::from_str(s)?;
                (sc.kind, sc.params, sc.provenance)
            }
            None => {
                let mut p = BTreeMap::new();
                p.insert("source".into(), serde_json::json!("csv"));
                (ProfileKind::Shock(NdeKind::N50), SimilarityParams::riemann(), p)
            }
        };
        Profile::new(kind, params, mesh, jets, provenance)
    }
}

/// Formats with 16 significant digits.
pub fn fmt16(v: f64) -> String {
    format!("{v:.15e}")
}

/// `g_a(z) = a⁵ g(z/a)`: the `k`-th derivative scales by `a^{5−k}`.
pub fn rescale(prof: &Profile, a: f64) -> Result<Profile> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::invalid("scaling factor must be nonzero"));
    }
    let mut p = prof.clone();
    for (z, j) in p.mesh.iter_mut().zip(p.jets.iter_mut()) {
        *z *= a;
        for (k, v) in j.iter_mut().enumerate() {
            *v *= a.powi(5 - k as i32);
        }
    }
    p.provenance.insert("rescaled_by".into(), serde_json::json!(a));
    Ok(p)
}

/// `g(z) ↦ g(−z)`: a shock profile becomes a rarefaction profile.
pub fn reflect_to_rarefaction(prof: &Profile) -> Profile {
    let mut p = prof.clone();
    p.mesh = p.mesh.iter().rev().map(|z| -z).collect();
    p.jets = p
        .jets
        .iter()
        .rev()
        .map(|j| [j[0], -j[1], j[2], -j[3], j[4]])
        .collect();
    p.kind = match prof.kind {
        ProfileKind::Shock(k) => ProfileKind::Rarefaction(k),
        ProfileKind::Rarefaction(k) => ProfileKind::Shock(k),
        other => other,
    };
    p
}

/// `dg/dz = (Az + Bz³)/(g − z⁵)`, the reduction of the fifth-order-in-time NDE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePlane {
    pub a: f64,
    pub b: f64,
}

pub fn rhs_phase_plane(a: f64, b: f64) -> Result<PhasePlane> {
    if !(a > 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("phase plane needs A > 0 and B >= 0"));
    }
    Ok(PhasePlane { a, b })
}

impl PhasePlane {
    pub fn slope(&self, z: f64, g: f64) -> Result<f64> {
        let den = g - z.powi(5);
        if den == 0.0 {
            return Err(Error::invalid(format!("({z}, {g}) lies on the singular manifold g = z^5")));
        }
        Ok((self.a * z + self.b * z.powi(3)) / den)
    }

    /// Event function vanishing on the singular manifold.
    pub fn singular(&self, z: f64, g: f64) -> f64 {
        g - z.powi(5)
    }
}
