//! Banded matrices with LU factorization by partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals. Storage leaves room
/// for the `kl` extra super-diagonals created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let in_band = j + self.kl >= i && j <= i + self.ku;
        assert!(in_band, "entry ({i}, {j}) outside the band");
        let k = self.idx(i, j).expect("band index");
        self.data[k] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let (mut umax, mut umin) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-14 * scale) {
                return Err(Error::SingularJacobian(k));
            }
            piv[k] = p;
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    let ka = self.idx(k, j).unwrap();
                    let kb = self.idx(p, j).unwrap();
                    self.data[ka] = b;
                    self.data[kb] = a;
                }
            }
            let pivot = self.get(k, k);
            umax = umax.max(pivot.abs());
            umin = umin.min(pivot.abs());
            for i in k + 1..=last_row {
                let ki = self.idx(i, k).unwrap();
                let l = self.data[ki] / pivot;
                self.data[ki] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = self.get(k, j);
                        if u != 0.0 {
                            let kij = self.idx(i, j).unwrap();
                            self.data[kij] -= l * u;
                        }
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv, pivot_ratio: umax / umin })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
    /// `max|u_kk| / min|u_kk|`, a cheap conditioning indicator.
    pub pivot_ratio: f64,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.m.n;
        let (kl, ku) = (self.m.kl, self.m.ku);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.m.get(i, k) * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                s -= self.m.get(k, j) * x[j];
            }
            x[k] = s / self.m.get(k, k);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_with_pivoting() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, if i % 7 == 0 { 0.0 } else { 2.0 });
            if i > 0 {
                a.set(i, i - 1, 1.0 + i as f64 * 0.01);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let lu = a.factor().unwrap();
        let y = lu.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_detected() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        assert!(matches!(a.factor(), Err(Error::SingularJacobian(2))));
    }
}
