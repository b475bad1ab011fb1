//! Banded LU factorization with partial pivoting.
//!
//! Row `r` stores the columns `r − kl ..= r + kl + ku`; the extra `kl`
//! upper diagonals hold the fill produced by row interchanges.

use crate::error::{FlowError, Result};

#[derive(Debug, Clone, PartialEq)]
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
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    pub fn in_band(&self, r: usize, c: usize) -> bool {
        c + self.kl >= r && c <= r + self.ku
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.kl + self.ku || r >= self.n || c >= self.n {
            return 0.0;
        }
        self.data[self.slot(r, c)]
    }

    /// Writes an entry inside the declared band.
    pub fn set(&mut self, r: usize, c: usize, v: f64) -> Result<()> {
        if r >= self.n || c >= self.n || !self.in_band(r, c) {
            return Err(FlowError::InvalidArgument(format!(
                "entry ({r}, {c}) outside band (kl = {}, ku = {})",
                self.kl, self.ku
            )));
        }
        let s = self.slot(r, c);
        self.data[s] = v;
        Ok(())
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) -> Result<()> {
        let old = self.get(r, c);
        self.set(r, c, old + v)
    }

    /// `y = A·x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (r, yr) in y.iter_mut().enumerate() {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n - 1);
            *yr = (lo..=hi).map(|c| self.get(r, c) * x[c]).sum();
        }
        y
    }

    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(FlowError::SingularMatrix(k));
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let a = self.slot(k, c);
                    let b = self.slot(p, c);
                    self.data.swap(a, b);
                }
            }
            pivots.push(p);
            let pivot = self.data[self.slot(k, k)];
            for r in k + 1..=last_row {
                let s = self.slot(r, k);
                if self.data[s] == 0.0 {
                    continue;
                }
                let l = self.data[s] / pivot;
                self.data[s] = l;
                for c in k + 1..=last_col {
                    let u = self.data[self.slot(k, c)];
                    if u != 0.0 {
                        let t = self.slot(r, c);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { lu: self, pivots })
    }
}

/// Factors produced by [`BandMatrix::factorize`].
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.lu;
        let n = a.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + a.kl).min(n - 1) {
                    x[r] -= a.data[a.slot(r, k)] * xk;
                }
            }
        }
        let reach = a.kl + a.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                s -= a.data[a.slot(k, c)] * x[c];
            }
            x[k] = s / a.data[a.slot(k, k)];
        }
        x
    }
}
