//! Uniform grid on the periodic strip `[0,1] × [0,2π)`.
//!
//! x-nodes include both boundaries (`hx = 1/(nx−1)`); y-nodes are periodic
//! (`hy = 2π/ny`, node `ny` wraps to `0`). Central differences are used in
//! the interior; at `i = 0` and `i = nx−1` the x-derivatives switch to
//! second-order one-sided stencils (four points for `∂ₓₓ` when `nx ≥ 4`).

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::symmetric::SymmetricFlow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripGrid {
    nx: usize,
    ny: usize,
}

impl StripGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 4 {
            return Err(FlowError::InvalidArgument(format!(
                "strip grid needs nx ≥ 3 and ny ≥ 4, got {nx}×{ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        1.0 / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * PI / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            1.0
        } else {
            i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    /// Flat index with periodic wrap in `j`.
    pub fn index(&self, i: usize, j: isize) -> usize {
        i * self.ny + j.rem_euclid(self.ny as isize) as usize
    }

    pub fn node(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    pub(crate) fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.nx || j >= self.ny {
            return Err(FlowError::IndexOutOfRange {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(())
    }

    /// Weights and x-offsets of the first x-derivative stencil at row `i`.
    pub(crate) fn dx_stencil(&self, i: usize) -> &'static [(isize, f64)] {
        if i == 0 {
            &[(0, -1.5), (1, 2.0), (2, -0.5)]
        } else if i + 1 == self.nx {
            &[(0, 1.5), (-1, -2.0), (-2, 0.5)]
        } else {
            &[(-1, -0.5), (1, 0.5)]
        }
    }

    /// Weights and x-offsets of the second x-derivative stencil at row `i`
    /// (to be divided by `hx²`).
    pub(crate) fn dxx_stencil(&self, i: usize) -> &'static [(isize, f64)] {
        let four = self.nx >= 4;
        if i == 0 {
            if four {
                &[(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
            } else {
                &[(0, 1.0), (1, -2.0), (2, 1.0)]
            }
        } else if i + 1 == self.nx {
            if four {
                &[(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]
            } else {
                &[(0, 1.0), (-1, -2.0), (-2, 1.0)]
            }
        } else {
            &[(-1, 1.0), (0, -2.0), (1, 1.0)]
        }
    }
}

/// Values on every node of a [`StripGrid`], x-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: StripGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: StripGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: StripGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FlowError::InvalidArgument(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.node(k);
            return Err(FlowError::InvalidArgument(format!(
                "non-finite value at node ({i}, {j})"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: StripGrid, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &StripGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: isize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        self.grid.check(i, j)?;
        Ok(self.at(i, j as isize))
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        self.grid.check(i, j)?;
        let k = self.grid.index(i, j as isize);
        self.values[k] = v;
        Ok(())
    }

    pub(crate) fn dx_at(&self, i: usize, j: isize) -> f64 {
        let mut s = 0.0;
        for &(di, w) in self.grid.dx_stencil(i) {
            s += w * self.at((i as isize + di) as usize, j);
        }
        s / self.grid.hx()
    }

    pub(crate) fn dxx_at(&self, i: usize, j: isize) -> f64 {
        let mut s = 0.0;
        for &(di, w) in self.grid.dxx_stencil(i) {
            s += w * self.at((i as isize + di) as usize, j);
        }
        let hx = self.grid.hx();
        s / (hx * hx)
    }

    pub(crate) fn dy_at(&self, i: usize, j: isize) -> f64 {
        (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * self.grid.hy())
    }

    pub(crate) fn dyy_at(&self, i: usize, j: isize) -> f64 {
        let hy = self.grid.hy();
        (self.at(i, j + 1) - 2.0 * self.at(i, j) + self.at(i, j - 1)) / (hy * hy)
    }

    pub(crate) fn dxy_at(&self, i: usize, j: isize) -> f64 {
        let mut s = 0.0;
        for &(di, w) in self.grid.dx_stencil(i) {
            s += w * self.dy_at((i as isize + di) as usize, j);
        }
        s / self.grid.hx()
    }

    pub fn dx(&self, i: usize, j: usize) -> Result<f64> {
        self.grid.check(i, j)?;
        Ok(self.dx_at(i, j as isize))
    }

    pub fn dxx(&self, i: usize, j: usize) -> Result<f64> {
        self.grid.check(i, j)?;
        Ok(self.dxx_at(i, j as isize))
    }

    pub fn dy(&self, i: usize, j: usize) -> Result<f64> {
        self.grid.check(i, j)?;
        Ok(self.dy_at(i, j as isize))
    }

    pub fn dyy(&self, i: usize, j: usize) -> Result<f64> {
        self.grid.check(i, j)?;
        Ok(self.dyy_at(i, j as isize))
    }

    pub fn dxy(&self, i: usize, j: usize) -> Result<f64> {
        self.grid.check(i, j)?;
        Ok(self.dxy_at(i, j as isize))
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `self − other` on the same grid.
    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(FlowError::InvalidArgument("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn add_scalar(&self, c: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    /// Inf-norm of `self − other` after removing the mean difference.
    pub fn distance_modulo_constant(&self, other: &ScalarField) -> Result<f64> {
        let d = self.sub(other)?;
        let m = d.mean();
        Ok(d.values.iter().fold(0.0, |acc, v| acc.max((v - m).abs())))
    }

    /// Periodic shift: `result(i, j) = self(i, j − shift)`.
    pub fn shift_y(&self, shift: isize) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for i in 0..self.grid.nx() {
            for j in 0..self.grid.ny() {
                let k = self.grid.index(i, j as isize);
                out.values[k] = self.at(i, j as isize - shift);
            }
        }
        out
    }

    /// Largest spread `max_j − min_j` over the columns of constant `x`.
    pub fn column_spread(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.grid.nx() {
            let row = &self.values[i * self.grid.ny()..(i + 1) * self.grid.ny()];
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(hi - lo);
        }
        worst
    }

    /// Average over `y` of each x-row.
    pub fn row_means(&self) -> Vec<f64> {
        let ny = self.grid.ny();
        (0..self.grid.nx())
            .map(|i| self.values[i * ny..(i + 1) * ny].iter().sum::<f64>() / ny as f64)
            .collect()
    }

    /// Dump as `nx,ny` followed by one CSV row per x-index.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{},{}", self.grid.nx(), self.grid.ny())?;
        for i in 0..self.grid.nx() {
            let row: Vec<String> = (0..self.grid.ny())
                .map(|j| format!("{:.16e}", self.at(i, j as isize)))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `φ_b` on the grid, constant along `y`.
pub fn lift_symmetric(flow: &SymmetricFlow, grid: StripGrid) -> ScalarField {
    let column: Vec<f64> = (0..grid.nx()).map(|i| flow.phi_at(grid.x(i))).collect();
    let mut values = Vec::with_capacity(grid.len());
    for phi in column {
        values.extend(std::iter::repeat_n(phi, grid.ny()));
    }
    ScalarField { grid, values }
}
