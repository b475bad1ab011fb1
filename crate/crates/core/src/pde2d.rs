//! Full potential flow on the strip with Bernoulli-type boundary rows.
//!
//! Interior nodes carry the discrete potential equation
//!
//! ```text
//! n²(c² − φ₁²)φ₁₁ − 2φ₁φ₂φ₁₂ + (c² − φ₂²/n²)φ₂₂ + n n'(c² + φ₂²/n²)φ₁ = 0,
//! c² = c₀ − (γ−1)/2 · (φ₁² + φ₂²/n²),
//! ```
//!
//! the entry row is `φ₁² + φ₂²/n(0)² − B(y) − λ` and the exit row is
//! `φ₁² + φ₂² − b₁²(1−ε)²`.
//!
//! Prescribing the speed on both ends over-determines the problem by one
//! scalar (the mass flux through entry and exit must agree). The discrete
//! system therefore carries one extra unknown, the uniform entry shift `λ`,
//! and one extra row, the gauge pin `φ(0,0) = target`. For exact data `λ`
//! is a pure discretization/regularization defect and tends to zero; a
//! non-vanishing `λ` under refinement means the prescribed entry data admit
//! no solution.
//!
//! Unknown layout: column 0 is `φ(0,0)`, column 1 is `λ`, column `k+1` is
//! node `k ≥ 1`. Row 0 is the gauge pin, row `k+1` is the residual of node
//! `k`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{FlowError, Result};
use crate::gasdyn::GasModel;
use crate::grid::{ScalarField, StripGrid};
use crate::nozzle::NozzleProfile;

pub const GAUGE_ROW: usize = 0;
pub const SHIFT_COLUMN: usize = 1;

/// Column of node `k` in the bordered system.
pub fn phi_column(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        k + 1
    }
}

/// Row of node `k` in the bordered system.
pub fn node_row(k: usize) -> usize {
    k + 1
}

type EntryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Entry speed² `B(y)` and exit target speed².
#[derive(Clone)]
pub struct BoundaryData {
    entry: EntryFn,
    pub exit_speed_sq: f64,
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryData")
            .field("entry(0)", &(self.entry)(0.0))
            .field("exit_speed_sq", &self.exit_speed_sq)
            .finish()
    }
}

impl BoundaryData {
    pub fn new<F>(entry: F, exit_speed_sq: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            entry: Arc::new(entry),
            exit_speed_sq,
        }
    }

    /// `B ≡ b0²`, exit `b1²`.
    pub fn symmetric(gas: &GasModel, profile: &NozzleProfile) -> Result<Self> {
        let b0 = gas.entry_speed(profile.n(0.0))?;
        let b1 = gas.sonic_speed().b1;
        Ok(Self::new(move |_| b0 * b0, b1 * b1))
    }

    /// `B(y) = b0²·shape(y)` with the symmetric exit.
    pub fn scaled_entry<F>(gas: &GasModel, profile: &NozzleProfile, shape: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let b0 = gas.entry_speed(profile.n(0.0))?;
        let b1 = gas.sonic_speed().b1;
        Ok(Self::new(move |y| b0 * b0 * shape(y), b1 * b1))
    }

    pub fn entry_speed_sq(&self, y: f64) -> f64 {
        (self.entry)(y)
    }

    /// `B > 0` at every entry node and at `y + 2π`.
    pub fn validate(&self, grid: &StripGrid) -> Result<()> {
        for j in 0..grid.ny() {
            let y = grid.y(j);
            let b = self.entry_speed_sq(y);
            if !(b.is_finite() && b > 0.0) {
                return Err(FlowError::InvalidArgument(format!(
                    "entry speed² B({y}) = {b} must be positive"
                )));
            }
            let wrapped = self.entry_speed_sq(y + 2.0 * std::f64::consts::PI);
            if (wrapped - b).abs() > 1e-12 * b.abs().max(1.0) {
                return Err(FlowError::InvalidArgument(format!(
                    "entry data not 2π-periodic at y = {y}"
                )));
            }
        }
        if !(self.exit_speed_sq.is_finite() && self.exit_speed_sq > 0.0) {
            return Err(FlowError::InvalidArgument("exit speed² must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps0: f64,
    pub eps_factor: f64,
    pub eps_min: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub damping_min: f64,
    /// Midpoint retries allowed after failed levels.
    #[serde(default = "default_retreats")]
    pub max_retreats: usize,
}

fn default_retreats() -> usize {
    8
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps0: 1e-1,
            eps_factor: 0.5,
            eps_min: 1e-3,
            newton_tol: 1e-9,
            max_newton: 50,
            damping_min: 1.0 / 1024.0,
            max_retreats: default_retreats(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FlowError::InvalidArgument(msg));
        if !(self.eps_min > 0.0 && self.eps_min <= self.eps0 && self.eps0 < 1.0) {
            return bad(format!(
                "need 0 < eps_min ≤ eps0 < 1, got eps_min = {}, eps0 = {}",
                self.eps_min, self.eps0
            ));
        }
        if !(self.eps_factor > 0.0 && self.eps_factor < 1.0) {
            return bad(format!("eps_factor = {} outside (0, 1)", self.eps_factor));
        }
        if !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return bad("newton_tol and max_newton must be positive".into());
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return bad(format!("damping_min = {} outside (0, 1]", self.damping_min));
        }
        Ok(())
    }

    /// `eps0, eps0·f, eps0·f², …` down to (and ending exactly at) `eps_min`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = vec![];
        let mut eps = self.eps0;
        while eps > self.eps_min * (1.0 + 1e-12) {
            out.push(eps);
            eps *= self.eps_factor;
        }
        out.push(self.eps_min);
        out
    }
}

/// One continuation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub eps: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub final_eps: f64,
    pub residual_history: Vec<f64>,
    pub stall_reason: Option<String>,
    /// Discrete (H2): `∂₁φ ≥ −1e−8` on entry and exit.
    pub h2_ok: bool,
    /// Uniform entry shift `λ` needed for the discrete problem.
    pub entry_shift: f64,
    pub max_interior_mach: f64,
    /// Smallest residual inf-norm reached at the last continuation level.
    pub residual_floor: f64,
    pub steps: Vec<ContinuationStep>,
    pub solution: ScalarField,
    pub mach_field: ScalarField,
}

/// JSON-facing part of a [`SolveReport`] (fields go to CSV dumps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub final_eps: f64,
    pub residual_history: Vec<f64>,
    pub stall_reason: Option<String>,
    pub h2_ok: bool,
    pub entry_shift: f64,
    pub max_interior_mach: f64,
    pub residual_floor: f64,
    pub steps: Vec<ContinuationStep>,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            converged: self.converged,
            final_eps: self.final_eps,
            residual_history: self.residual_history.clone(),
            stall_reason: self.stall_reason.clone(),
            h2_ok: self.h2_ok,
            entry_shift: self.entry_shift,
            max_interior_mach: self.max_interior_mach,
            residual_floor: self.residual_floor,
            steps: self.steps.clone(),
        }
    }
}

/// Bordered Jacobian of the discrete system.
#[derive(Debug, Clone)]
pub struct JacobianSystem {
    pub matrix: BandMatrix,
}

impl JacobianSystem {
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.matrix.get(r, c)
    }

    pub fn size(&self) -> usize {
        self.matrix.size()
    }
}

/// Column dependencies and colouring of the residual stencils.
#[derive(Debug, Clone)]
struct Pattern {
    /// Node columns each node row depends on.
    row_nodes: Vec<Vec<usize>>,
    /// Node rows each node column influences.
    col_rows: Vec<Vec<usize>>,
    colors: Vec<Vec<usize>>,
    kl: usize,
    ku: usize,
}

impl Pattern {
    fn build(grid: &StripGrid) -> Self {
        let n = grid.len();
        let nx = grid.nx();
        let mut row_nodes = Vec::with_capacity(n);
        for k in 0..n {
            let (i, j) = grid.node(k);
            let j = j as isize;
            let mut deps = Vec::new();
            if i == 0 || i + 1 == nx {
                for &(di, _) in grid.dx_stencil(i) {
                    deps.push(grid.index((i as isize + di) as usize, j));
                }
                deps.push(grid.index(i, j - 1));
                deps.push(grid.index(i, j + 1));
            } else {
                for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        deps.push(grid.index((i as isize + di) as usize, j + dj));
                    }
                }
            }
            deps.sort_unstable();
            deps.dedup();
            row_nodes.push(deps);
        }
        let mut col_rows = vec![Vec::new(); n];
        for (r, deps) in row_nodes.iter().enumerate() {
            for &c in deps {
                col_rows[c].push(r);
            }
        }
        // Greedy distance-2 colouring: columns sharing a row get distinct colours.
        let mut color_of = vec![usize::MAX; n];
        let mut colors: Vec<Vec<usize>> = Vec::new();
        let mut forbidden = Vec::new();
        for c in 0..n {
            forbidden.clear();
            for &r in &col_rows[c] {
                for &other in &row_nodes[r] {
                    if color_of[other] != usize::MAX {
                        forbidden.push(color_of[other]);
                    }
                }
            }
            let color = (0..).find(|k| !forbidden.contains(k)).unwrap();
            if color == colors.len() {
                colors.push(Vec::new());
            }
            colors[color].push(c);
            color_of[c] = color;
        }
        let mut kl = 1usize;
        let mut ku = 1usize;
        let mut note = |r: usize, c: usize| {
            if c > r {
                ku = ku.max(c - r);
            } else {
                kl = kl.max(r - c);
            }
        };
        for (k, deps) in row_nodes.iter().enumerate() {
            for &c in deps {
                note(node_row(k), phi_column(c));
            }
            if grid.node(k).0 == 0 {
                note(node_row(k), SHIFT_COLUMN);
            }
        }
        Self {
            row_nodes,
            col_rows,
            colors,
            kl,
            ku,
        }
    }
}

/// Discrete potential-flow problem on a fixed grid.
#[derive(Clone)]
pub struct PotentialProblem {
    gas: GasModel,
    profile: NozzleProfile,
    grid: StripGrid,
    data: BoundaryData,
    gauge_value: f64,
    n: Vec<f64>,
    dn: Vec<f64>,
    pattern: Arc<Pattern>,
}

#[derive(Debug, Clone, Copy)]
struct Gradient {
    d1: f64,
    d2: f64,
}

impl PotentialProblem {
    pub fn new(
        gas: GasModel,
        profile: NozzleProfile,
        grid: StripGrid,
        data: BoundaryData,
    ) -> Result<Self> {
        data.validate(&grid)?;
        let n = (0..grid.nx()).map(|i| profile.n(grid.x(i))).collect();
        let dn = (0..grid.nx()).map(|i| profile.dn(grid.x(i))).collect();
        Ok(Self {
            gas,
            profile,
            grid,
            data,
            gauge_value: 0.0,
            n,
            dn,
            pattern: Arc::new(Pattern::build(&grid)),
        })
    }

    /// Target value of the pinned node `φ(0,0)`.
    pub fn with_gauge(mut self, value: f64) -> Self {
        self.gauge_value = value;
        self
    }

    pub fn grid(&self) -> &StripGrid {
        &self.grid
    }

    pub fn gas(&self) -> &GasModel {
        &self.gas
    }

    pub fn profile(&self) -> &NozzleProfile {
        &self.profile
    }

    pub fn boundary_data(&self) -> &BoundaryData {
        &self.data
    }

    pub fn gauge_value(&self) -> f64 {
        self.gauge_value
    }

    pub fn system_size(&self) -> usize {
        self.grid.len() + 1
    }

    fn gradient(&self, phi: &ScalarField, i: usize, j: isize) -> Gradient {
        Gradient {
            d1: phi.dx_at(i, j),
            d2: phi.dy_at(i, j),
        }
    }

    fn c2_at(&self, speed_sq: f64, i: usize, j: isize) -> Result<f64> {
        let limit_sq = 2.0 * self.gas.c0() / (self.gas.gamma() - 1.0);
        self.gas
            .sound_speed_squared_from_sq(speed_sq)
            .map_err(|_| FlowError::SonicExceeded {
                i,
                j: j.rem_euclid(self.grid.ny() as isize) as usize,
                speed_sq,
                limit_sq,
            })
    }

    fn interior_node(&self, phi: &ScalarField, i: usize, j: isize) -> Result<f64> {
        let n = self.n[i];
        let dn = self.dn[i];
        let g = self.gradient(phi, i, j);
        let n2 = n * n;
        let speed_sq = g.d1 * g.d1 + g.d2 * g.d2 / n2;
        let c2 = self.c2_at(speed_sq, i, j)?;
        let d11 = phi.dxx_at(i, j);
        let d22 = phi.dyy_at(i, j);
        let d12 = phi.dxy_at(i, j);
        Ok(n2 * (c2 - g.d1 * g.d1) * d11 - 2.0 * g.d1 * g.d2 * d12
            + (c2 - g.d2 * g.d2 / n2) * d22
            + n * dn * (c2 + g.d2 * g.d2 / n2) * g.d1)
    }

    fn entry_node(&self, phi: &ScalarField, j: isize, shift: f64) -> f64 {
        let g = self.gradient(phi, 0, j);
        let n0 = self.n[0];
        let y = self.grid.y(j as usize);
        g.d1 * g.d1 + g.d2 * g.d2 / (n0 * n0) - self.data.entry_speed_sq(y) - shift
    }

    fn exit_node(&self, phi: &ScalarField, j: isize, eps: f64) -> f64 {
        let i = self.grid.nx() - 1;
        let g = self.gradient(phi, i, j);
        let n1 = self.n[i];
        g.d1 * g.d1 + g.d2 * g.d2 / (n1 * n1) - self.data.exit_speed_sq * (1.0 - eps) * (1.0 - eps)
    }

    fn node_residual(
        &self,
        phi: &ScalarField,
        i: usize,
        j: isize,
        eps: f64,
        shift: f64,
    ) -> Result<f64> {
        if i == 0 {
            Ok(self.entry_node(phi, j, shift))
        } else if i + 1 == self.grid.nx() {
            Ok(self.exit_node(phi, j, eps))
        } else {
            self.interior_node(phi, i, j)
        }
    }

    fn check_field(&self, phi: &ScalarField) -> Result<()> {
        if *phi.grid() != self.grid {
            return Err(FlowError::InvalidArgument("field lives on a different grid".into()));
        }
        Ok(())
    }

    /// Discrete potential equation at interior nodes; boundary rows are zero.
    pub fn interior_residual(&self, phi: &ScalarField) -> Result<ScalarField> {
        self.check_field(phi)?;
        let mut out = ScalarField::zeros(self.grid);
        for i in 1..self.grid.nx() - 1 {
            for j in 0..self.grid.ny() {
                let v = self.interior_node(phi, i, j as isize)?;
                out.set(i, j, v)?;
            }
        }
        Ok(out)
    }

    /// Entry and exit Bernoulli rows (entry shift `λ = 0`).
    pub fn boundary_residual(&self, phi: &ScalarField, eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_field(phi)?;
        let ny = self.grid.ny() as isize;
        let entry = (0..ny).map(|j| self.entry_node(phi, j, 0.0)).collect();
        let exit = (0..ny).map(|j| self.exit_node(phi, j, eps)).collect();
        Ok((entry, exit))
    }

    /// Pack a potential and an entry shift into the bordered unknown vector.
    pub fn pack(&self, phi: &ScalarField, shift: f64) -> Vec<f64> {
        let mut z = vec![0.0; self.system_size()];
        for (k, &v) in phi.values().iter().enumerate() {
            z[phi_column(k)] = v;
        }
        z[SHIFT_COLUMN] = shift;
        z
    }

    pub fn unpack(&self, z: &[f64]) -> (ScalarField, f64) {
        let values: Vec<f64> = (0..self.grid.len()).map(|k| z[phi_column(k)]).collect();
        let phi = ScalarField::from_values(self.grid, values)
            .unwrap_or_else(|_| ScalarField::zeros(self.grid));
        (phi, z[SHIFT_COLUMN])
    }

    fn residual_of(&self, phi: &ScalarField, shift: f64, eps: f64) -> Result<Vec<f64>> {
        let mut r = vec![0.0; self.system_size()];
        r[GAUGE_ROW] = phi.at(0, 0) - self.gauge_value;
        for k in 0..self.grid.len() {
            let (i, j) = self.grid.node(k);
            r[node_row(k)] = self.node_residual(phi, i, j as isize, eps, shift)?;
        }
        Ok(r)
    }

    /// Full bordered residual (gauge row first).
    pub fn system_residual(&self, z: &[f64], eps: f64) -> Result<Vec<f64>> {
        let (phi, shift) = self.unpack_raw(z);
        self.residual_of(&phi, shift, eps)
    }

    fn unpack_raw(&self, z: &[f64]) -> (ScalarField, f64) {
        let values: Vec<f64> = (0..self.grid.len()).map(|k| z[phi_column(k)]).collect();
        // Non-finite entries surface as residual errors downstream.
        let phi = ScalarField::from_values(self.grid, values.clone()).unwrap_or_else(|_| {
            let mut f = ScalarField::zeros(self.grid);
            f.values_mut().copy_from_slice(&values);
            f
        });
        (phi, z[SHIFT_COLUMN])
    }

    /// Jacobian of [`PotentialProblem::system_residual`] by coloured forward
    /// differences with step `1e−7·(1+|φ|)`; the gauge row and the shift
    /// column are exact.
    pub fn assemble_jacobian(&self, z: &[f64], eps: f64) -> Result<JacobianSystem> {
        let (mut phi, shift) = self.unpack_raw(z);
        let base = self.residual_of(&phi, shift, eps)?;
        let pat = &*self.pattern;
        let mut m = BandMatrix::zeros(self.system_size(), pat.kl, pat.ku);
        m.set(GAUGE_ROW, phi_column(0), 1.0)?;
        for j in 0..self.grid.ny() {
            m.set(node_row(self.grid.index(0, j as isize)), SHIFT_COLUMN, -1.0)?;
        }
        let mut steps = vec![0.0; self.grid.len()];
        for color in &pat.colors {
            for &c in color {
                let v = phi.values()[c];
                let h = 1e-7 * (1.0 + v.abs());
                // Representable step.
                let h = (v + h) - v;
                steps[c] = h;
                phi.values_mut()[c] = v + h;
            }
            for &c in color {
                for &r in &pat.col_rows[c] {
                    let (i, j) = self.grid.node(r);
                    let val = self.node_residual(&phi, i, j as isize, eps, shift)?;
                    let d = (val - base[node_row(r)]) / steps[c];
                    m.set(node_row(r), phi_column(c), d)?;
                }
            }
            for &c in color {
                phi.values_mut()[c] -= steps[c];
            }
            // Restore exactly.
            for &c in color {
                phi.values_mut()[c] = z[phi_column(c)];
            }
        }
        Ok(JacobianSystem { matrix: m })
    }

    /// Node columns each node row depends on (stencil sparsity).
    pub fn row_dependencies(&self, k: usize) -> &[usize] {
        &self.pattern.row_nodes[k]
    }

    pub fn color_count(&self) -> usize {
        self.pattern.colors.len()
    }

    /// Local Mach number `|∇φ|_G / c` at every node.
    pub fn mach_field(&self, phi: &ScalarField) -> Result<ScalarField> {
        self.check_field(phi)?;
        let mut out = ScalarField::zeros(self.grid);
        for i in 0..self.grid.nx() {
            let n2 = self.n[i] * self.n[i];
            for j in 0..self.grid.ny() {
                let g = self.gradient(phi, i, j as isize);
                let q2 = g.d1 * g.d1 + g.d2 * g.d2 / n2;
                let c2 = self.c2_at(q2, i, j as isize)?;
                out.set(i, j, (q2 / c2).sqrt())?;
            }
        }
        Ok(out)
    }

    pub fn max_interior_mach(mach: &ScalarField) -> f64 {
        let g = mach.grid();
        let mut m = 0.0f64;
        for i in 1..g.nx() - 1 {
            for j in 0..g.ny() {
                m = m.max(mach.at(i, j as isize));
            }
        }
        m
    }

    /// Discrete (H2): `∂₁φ ≥ −1e−8` at every entry and exit node.
    pub fn h2_holds(&self, phi: &ScalarField) -> bool {
        let last = self.grid.nx() - 1;
        (0..self.grid.ny() as isize)
            .all(|j| phi.dx_at(0, j) >= -1e-8 && phi.dx_at(last, j) >= -1e-8)
    }

    /// Largest interior Mach number of a packed state (infinite past the
    /// limit speed).
    fn interior_mach_max(&self, z: &[f64]) -> f64 {
        let (phi, _) = self.unpack_raw(z);
        let mut worst = 0.0f64;
        for i in 1..self.grid.nx() - 1 {
            let n2 = self.n[i] * self.n[i];
            for j in 0..self.grid.ny() as isize {
                let g = self.gradient(&phi, i, j);
                let q2 = g.d1 * g.d1 + g.d2 * g.d2 / n2;
                match self.gas.sound_speed_squared_from_sq(q2) {
                    Ok(c2) => worst = worst.max((q2 / c2).sqrt()),
                    Err(_) => return f64::INFINITY,
                }
            }
        }
        worst
    }

    fn inf(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Damped Newton at one regularization level, starting from `z`. Steps
    /// are halved until the residual decreases with a valid closure and an
    /// admissible interior Mach number.
    fn newton_level(&self, z: &[f64], eps: f64, config: &SolverConfig, history: &mut Vec<f64>) -> Result<Level> {
        let mut z = z.to_vec();
        let mut r = self.system_residual(&z, eps)?;
        let mut norm = Self::inf(&r);
        let mut floor = norm;
        history.push(norm);
        let mut iterations = 0;
        let mut mach = self.interior_mach_max(&z);
        let mut failure = None;
        while norm > config.newton_tol {
            if iterations == config.max_newton {
                failure = Some(format!(
                    "iteration cap {} reached at eps = {eps:e} (residual {norm:e})",
                    config.max_newton
                ));
                break;
            }
            iterations += 1;
            let lu = match self.assemble_jacobian(&z, eps)?.matrix.factorize() {
                Ok(lu) => lu,
                Err(e) => {
                    failure = Some(format!("{e} at eps = {eps:e}"));
                    break;
                }
            };
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let mut delta = lu.solve(&rhs);
            // The pin row is linear; keep its update free of roundoff.
            delta[phi_column(0)] = rhs[GAUGE_ROW];
            let mut t = 1.0;
            let accepted = loop {
                let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
                if let Ok(rt) = self.system_residual(&trial, eps) {
                    let nt = Self::inf(&rt);
                    if nt < norm {
                        // Stay elliptic: no interior node may turn supersonic,
                        // and a supersonic start may not get worse.
                        let m = self.interior_mach_max(&trial);
                        if m < 1.0 || m <= mach {
                            break Some((trial, rt, nt, m));
                        }
                    }
                }
                t *= 0.5;
                if t < config.damping_min {
                    break None;
                }
            };
            let Some((trial, rt, nt, m)) = accepted else {
                failure = Some(format!("line search stalled at eps = {eps:e} (residual {norm:e})"));
                break;
            };
            z = trial;
            mach = m;
            r = rt;
            norm = nt;
            floor = floor.min(norm);
            history.push(norm);
        }
        Ok(Level {
            z,
            step: ContinuationStep {
                eps,
                iterations,
                residual: norm,
                converged: failure.is_none(),
            },
            floor,
            failure,
        })
    }

    /// Damped Newton with continuation in the exit regularization `eps`.
    ///
    /// Every level of [`SolverConfig::schedule`] is solved in turn. A level
    /// that fails is retried from the last accepted state at the midpoint
    /// between the last accepted `eps` and the failed one, at most
    /// `max_retreats` times per solve. Before any level is accepted the
    /// retry moves halfway towards `eps = 1` instead.
    ///
    /// The initial field is shifted so the pinned node matches the gauge.
    /// Stalls are reported through `converged = false` and `stall_reason`;
    /// an error is returned only when the initial field itself is outside
    /// the Bernoulli closure.
    pub fn newton_solve(&self, initial: &ScalarField, config: &SolverConfig) -> Result<SolveReport> {
        config.validate()?;
        self.check_field(initial)?;
        let start = initial.add_scalar(self.gauge_value - initial.at(0, 0));
        let schedule = config.schedule();
        let mut accepted = self.pack(&start, 0.0);
        // Fails only if the start lies outside the closure.
        self.system_residual(&accepted, schedule[0])?;

        let mut history = Vec::new();
        let mut steps = Vec::new();
        let mut stall_reason = None;
        let mut accepted_eps: Option<f64> = None;
        let mut retreats = 0;
        let mut next = 0;
        let mut target = schedule[0];
        let mut last = Level {
            z: accepted.clone(),
            step: ContinuationStep { eps: target, iterations: 0, residual: f64::INFINITY, converged: false },
            floor: f64::INFINITY,
            failure: None,
        };
        while next < schedule.len() {
            last = self.newton_level(&accepted, target, config, &mut history)?;
            steps.push(last.step.clone());
            if let Some(reason) = &last.failure {
                if retreats == config.max_retreats {
                    stall_reason = Some(reason.clone());
                    break;
                }
                retreats += 1;
                target = 0.5 * (accepted_eps.unwrap_or(1.0) + target);
                continue;
            }
            accepted = last.z.clone();
            accepted_eps = Some(target);
            if target == schedule[next] {
                next += 1;
            }
            if next < schedule.len() {
                target = schedule[next];
            }
        }

        let mut final_z = last.z.clone();
        let (mut solution, mut shift) = self.unpack(&final_z);
        let mach_field = match self.mach_field(&solution) {
            Ok(m) => m,
            Err(_) => {
                final_z = accepted;
                (solution, shift) = self.unpack(&final_z);
                self.mach_field(&solution)?
            }
        };
        Ok(SolveReport {
            converged: stall_reason.is_none(),
            final_eps: last.step.eps,
            residual_history: history,
            stall_reason,
            h2_ok: self.h2_holds(&solution),
            entry_shift: shift,
            max_interior_mach: Self::max_interior_mach(&mach_field),
            residual_floor: last.floor,
            steps,
            solution,
            mach_field,
        })
    }
}

struct Level {
    z: Vec<f64>,
    step: ContinuationStep,
    floor: f64,
    failure: Option<String>,
}
