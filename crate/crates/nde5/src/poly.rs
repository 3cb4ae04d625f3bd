//! Dense polynomial arithmetic (ascending coefficients) and root finding.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real polynomial `c[0] + c[1] x + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Poly(c)
    }

    pub fn monomial(k: usize, a: f64) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = a;
        Poly::new(c)
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, x: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.0.len() == 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn add(&self, o: &Poly) -> Self {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }

    pub fn scale(&self, a: f64) -> Self {
        Poly::new(self.0.iter().map(|c| a * c).collect())
    }

    pub fn mul(&self, o: &Poly) -> Self {
        let mut c = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Poly::new(vec![1.0]), |p, &r| p.mul(&Poly::new(vec![-r, 1.0])))
    }

    /// Polynomial remainder of `self` divided by `d`.
    fn rem(&self, d: &Poly) -> Poly {
        let mut r = self.0.clone();
        let dd = d.degree();
        let lead = d.0[dd];
        while r.len() > dd && r.len() > 1 {
            let k = r.len() - 1;
            let q = r[k] / lead;
            for j in 0..=dd {
                r[k - dd + j] -= q * d.0[j];
            }
            r.pop();
        }
        Poly::new(r)
    }

    /// Number of distinct real roots in `(a, b]` by Sturm sequence sign counting.
    pub fn sturm_count(&self, a: f64, b: f64) -> usize {
        let seq = self.sturm_sequence();
        let changes = |x: f64| -> usize {
            let vals: Vec<f64> = seq
                .iter()
                .map(|p| if x.is_infinite() { p.end_behaviour(x) } else { p.eval(x) })
                .filter(|v| *v != 0.0)
                .collect();
            vals.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
        };
        changes(a).saturating_sub(changes(b))
    }

    fn end_behaviour(&self, x: f64) -> f64 {
        let lead = self.0[self.degree()];
        if x > 0.0 || self.degree() % 2 == 0 {
            lead
        } else {
            -lead
        }
    }

    fn sturm_sequence(&self) -> Vec<Poly> {
        let scale = self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let eps = 1e-12 * scale.max(1.0);
        let mut seq = vec![self.clone(), self.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].degree() == 0 {
                break;
            }
            let mut r = seq[n - 2].rem(&seq[n - 1]).scale(-1.0);
            r = Poly::new(r.0.iter().map(|&c| if c.abs() < eps { 0.0 } else { c }).collect());
            if r.0.iter().all(|c| *c == 0.0) {
                break;
            }
            seq.push(r);
        }
        seq
    }
}

/// All complex roots of `sum coeffs[k] x^k`, from the companion matrix, polished by Newton
/// steps and with near-coincident roots merged to their cluster mean.
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() == 0.0 {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::invalid("constant polynomial has no roots"));
    }
    if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("non-finite polynomial coefficient"));
    }
    let zero = Complex64::new(0.0, 0.0);
    let zeros_at_origin = c.iter().take_while(|z| z.norm() == 0.0).count();
    let c_red = &c[zeros_at_origin..];
    let mut rs = vec![zero; zeros_at_origin];
    if c_red.len() > 1 {
        rs.extend(companion_eigenvalues(c_red).unwrap_or_else(|| aberth(c_red)));
    }

    let p = |z: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |a, &k| a * z + k);
    let dp = |z: Complex64| {
        c.iter().enumerate().skip(1).rev().fold(Complex64::new(0.0, 0.0), |a, (k, &v)| {
            a * z + v * k as f64
        })
    };
    for r in rs.iter_mut() {
        for _ in 0..8 {
            let d = dp(*r);
            if d.norm() == 0.0 {
                break;
            }
            let step = p(*r) / d;
            let cand = *r - step;
            if !(cand.re.is_finite() && cand.im.is_finite()) || p(cand).norm() > p(*r).norm() {
                break;
            }
            *r = cand;
            if step.norm() <= 1e-16 * r.norm().max(1.0) {
                break;
            }
        }
    }
    // merge clusters (multiple roots are ill-conditioned for Newton)
    let scale = rs.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let tol = 1e-6 * scale;
    let mut used = vec![false; rs.len()];
    let mut out = Vec::with_capacity(rs.len());
    for i in 0..rs.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        for j in i + 1..rs.len() {
            if !used[j] && (rs[j] - rs[i]).norm() < tol {
                members.push(j);
            }
        }
        let mean = members.iter().map(|&k| rs[k]).sum::<Complex64>() / members.len() as f64;
        for &k in &members {
            used[k] = true;
            out.push(if members.len() > 1 { mean } else { rs[k] });
        }
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

fn companion_eigenvalues(c: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = c.len() - 1;
    let lead = c[n];
    if c.iter().all(|z| z.im == 0.0) {
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -c[i].re / lead.re;
        }
        let ev = comp.try_schur(1e-15, 10_000)?.complex_eigenvalues();
        return Some(ev.iter().copied().collect());
    }
    let mut comp = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i] / lead;
    }
    let ev = comp.try_schur(1e-15, 10_000)?.eigenvalues()?;
    Some(ev.iter().copied().collect())
}

/// Aberth–Ehrlich simultaneous iteration, used when the Schur form fails.
fn aberth(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let p = |z: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |a, &k| a * z + k);
    let dp = |z: Complex64| {
        c.iter().enumerate().skip(1).rev().fold(Complex64::new(0.0, 0.0), |a, (k, &v)| a * z + v * k as f64)
    };
    let radius = 1.0 + c[..n].iter().map(|z| (z / c[n]).norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> =
        (0..n).map(|k| Complex64::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let ratio = p(z[i]) / dp(z[i]);
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            if w.re.is_finite() && w.im.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / z[i].norm().max(1.0));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Roots of a real polynomial.
pub fn real_poly_roots(p: &Poly) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = p.0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    roots(&c)
}
