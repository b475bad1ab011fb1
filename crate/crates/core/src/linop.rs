//! Linearized operator for `ψ = φ_b − φ` and the sign checks around it.
//!
//! The `a` coefficients come from the exact symmetric flow alone; the drift
//! terms mix discrete derivatives of `φ` with the exact speed `u = ∂₁φ_b`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gasdyn::GasModel;
use crate::grid::{ScalarField, StripGrid};
use crate::nozzle::NozzleProfile;
use crate::symmetric::{acceleration_at, speed_at};

/// Coefficients of `a¹¹∂₁₁ψ + 2a¹²∂₁₂ψ + a²²∂₂₂ψ + b¹∂₁ψ + b²∂₂ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedCoefficients {
    pub a11: ScalarField,
    pub a12: ScalarField,
    pub a22: ScalarField,
    pub b1: ScalarField,
    pub b2: ScalarField,
    pub cb2: ScalarField,
    pub oblique: ObliqueVectors,
}

/// Boundary vectors of the linearized Bernoulli rows, one per `y` node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliqueVectors {
    pub l0: Vec<[f64; 2]>,
    pub l1: Vec<[f64; 2]>,
}

impl ObliqueVectors {
    /// Every first component nonnegative.
    pub fn is_oblique(&self) -> bool {
        self.l0.iter().chain(&self.l1).all(|l| l[0] >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub quantity: String,
    /// `"min"` or `"max"`.
    pub extremum: String,
    pub min_or_max: f64,
    pub node_of_extremum: (usize, usize),
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInequalityReport {
    pub key: SignReport,
    pub acceleration: SignReport,
    pub identity: SignReport,
}

impl KeyInequalityReport {
    pub fn all_pass(&self) -> bool {
        self.key.pass && self.acceleration.pass && self.identity.pass
    }
}

/// Exact `u`, `u'` at the grid stations.
fn base_profile(gas: &GasModel, profile: &NozzleProfile, grid: &StripGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut u = Vec::with_capacity(grid.nx());
    let mut du = Vec::with_capacity(grid.nx());
    for i in 0..grid.nx() {
        let x = grid.x(i);
        u.push(speed_at(gas, profile, x)?);
        du.push(acceleration_at(gas, profile, x)?);
    }
    Ok((u, du))
}

pub fn assemble_linearized(
    phi: &ScalarField,
    gas: &GasModel,
    profile: &NozzleProfile,
) -> Result<LinearizedCoefficients> {
    let grid = *phi.grid();
    let (u, _) = base_profile(gas, profile, &grid)?;
    let g = gas.gamma();
    let c0 = gas.c0();
    let mut a11 = ScalarField::zeros(grid);
    let a12 = ScalarField::zeros(grid);
    let mut a22 = ScalarField::zeros(grid);
    let mut b1 = ScalarField::zeros(grid);
    let mut b2 = ScalarField::zeros(grid);
    let mut cb2f = ScalarField::zeros(grid);
    for i in 0..grid.nx() {
        let x = grid.x(i);
        let n = profile.n(x);
        let dn = profile.dn(x);
        let n2 = n * n;
        let ub = u[i];
        let cb2 = c0 - 0.5 * (g - 1.0) * ub * ub;
        for j in 0..grid.ny() {
            let jj = j as isize;
            let p1 = phi.dx_at(i, jj);
            let p2 = phi.dy_at(i, jj);
            let p11 = phi.dxx_at(i, jj);
            let p22 = phi.dyy_at(i, jj);
            let p12 = phi.dxy_at(i, jj);
            let sum1 = p1 + ub;
            let vb1 = -(0.5 * (g + 1.0) * n2 * p11 + 0.5 * (g - 1.0) * p22) * sum1
                + n * dn * (cb2 + 0.5 * (g - 1.0) * p1 * sum1);
            let vb2 = 0.5 * (g - 1.0) * p2 * p11
                + 2.0 * p1 * p12
                + 0.5 * (g + 1.0) / n2 * p2 * p22
                + 0.5 * (g - 3.0) * (dn / n) * p1 * p2;
            a11.set(i, j, n2 * (cb2 - ub * ub))?;
            a22.set(i, j, cb2)?;
            b1.set(i, j, vb1)?;
            b2.set(i, j, vb2)?;
            cb2f.set(i, j, cb2)?;
        }
    }
    let n0 = profile.n(0.0);
    let last = grid.nx() - 1;
    let l0 = (0..grid.ny() as isize)
        .map(|j| [phi.dx_at(0, j) + u[0], phi.dy_at(0, j) / (n0 * n0)])
        .collect();
    let l1 = (0..grid.ny() as isize)
        .map(|j| [phi.dx_at(last, j) + u[last], phi.dy_at(last, j)])
        .collect();
    Ok(LinearizedCoefficients {
        a11,
        a12,
        a22,
        b1,
        b2,
        cb2: cb2f,
        oblique: ObliqueVectors { l0, l1 },
    })
}

impl LinearizedCoefficients {
    pub fn grid(&self) -> &StripGrid {
        self.a11.grid()
    }

    /// Operator applied to `ψ` at every node (one-sided in `x` on the boundary).
    pub fn apply(&self, psi: &ScalarField) -> Result<ScalarField> {
        let grid = *self.grid();
        let mut out = ScalarField::zeros(grid);
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let jj = j as isize;
                let v = self.a11.at(i, jj) * psi.dxx_at(i, jj)
                    + 2.0 * self.a12.at(i, jj) * psi.dxy_at(i, jj)
                    + self.a22.at(i, jj) * psi.dyy_at(i, jj)
                    + self.b1.at(i, jj) * psi.dx_at(i, jj)
                    + self.b2.at(i, jj) * psi.dy_at(i, jj);
                out.set(i, j, v)?;
            }
        }
        Ok(out)
    }
}

fn extremum_over_column<F: Fn(isize) -> f64>(
    grid: &StripGrid,
    i: usize,
    take_max: bool,
    f: F,
) -> (f64, (usize, usize)) {
    let mut best = if take_max { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut at = (i, 0);
    for j in 0..grid.ny() {
        let v = f(j as isize);
        if (take_max && v > best) || (!take_max && v < best) {
            best = v;
            at = (i, j);
        }
    }
    (best, at)
}

/// Max of `b¹` over the exit column; passes iff strictly negative.
pub fn check_exit_drift_sign(coeffs: &LinearizedCoefficients) -> SignReport {
    let grid = *coeffs.grid();
    let last = grid.nx() - 1;
    let (v, at) = extremum_over_column(&grid, last, true, |j| coeffs.b1.at(last, j));
    SignReport {
        quantity: "exit_drift_b1".into(),
        extremum: "max".into(),
        min_or_max: v,
        node_of_extremum: at,
        pass: v < 0.0,
    }
}

/// Tolerance on the reconstructed exit identity residual.
pub const IDENTITY_TOL: f64 = 2e-2;

/// Exit-column sign checks.
///
/// `key` is the min of `(γ+1)/2·∂₁₁φ + (γ−1)/2·∂₂₂φ`, `acceleration` the
/// min of `∂₁₁φ`; both pass iff strictly positive. `identity` is the max
/// magnitude of `(c² + (∂₂φ)²)·Δφ − c²·∂₁₁φ` with `c²` from the local
/// speed; it passes iff at most [`IDENTITY_TOL`].
pub fn check_key_inequality(phi: &ScalarField, gas: &GasModel) -> Result<KeyInequalityReport> {
    let grid = *phi.grid();
    let last = grid.nx() - 1;
    let g = gas.gamma();
    let (key, key_at) = extremum_over_column(&grid, last, false, |j| {
        0.5 * (g + 1.0) * phi.dxx_at(last, j) + 0.5 * (g - 1.0) * phi.dyy_at(last, j)
    });
    let (acc, acc_at) = extremum_over_column(&grid, last, false, |j| phi.dxx_at(last, j));
    let mut identity = 0.0f64;
    let mut id_at = (last, 0);
    for j in 0..grid.ny() as isize {
        let p1 = phi.dx_at(last, j);
        let p2 = phi.dy_at(last, j);
        let c2 = gas.sound_speed_squared_from_sq(p1 * p1 + p2 * p2)?;
        let p11 = phi.dxx_at(last, j);
        let lap = p11 + phi.dyy_at(last, j);
        let r = ((c2 + p2 * p2) * lap - c2 * p11).abs();
        if r > identity {
            identity = r;
            id_at = (last, j as usize);
        }
    }
    Ok(KeyInequalityReport {
        key: SignReport {
            quantity: "key_inequality".into(),
            extremum: "min".into(),
            min_or_max: key,
            node_of_extremum: key_at,
            pass: key > 0.0,
        },
        acceleration: SignReport {
            quantity: "exit_acceleration".into(),
            extremum: "min".into(),
            min_or_max: acc,
            node_of_extremum: acc_at,
            pass: acc > 0.0,
        },
        identity: SignReport {
            quantity: "exit_identity_residual".into(),
            extremum: "max".into(),
            min_or_max: identity,
            node_of_extremum: id_at,
            pass: identity <= IDENTITY_TOL,
        },
    })
}

/// `‖L(φ_b − φ)‖∞ / (‖φ_b − φ‖∞ + hx²)` over interior nodes.
pub fn consistency_constant(
    coeffs: &LinearizedCoefficients,
    phi: &ScalarField,
    lift: &ScalarField,
) -> Result<f64> {
    let psi = lift.sub(phi)?;
    let grid = *phi.grid();
    let applied = coeffs.apply(&psi)?;
    let mut worst = 0.0f64;
    for i in 1..grid.nx() - 1 {
        for j in 0..grid.ny() as isize {
            worst = worst.max(applied.at(i, j).abs());
        }
    }
    let spread = psi.sub(&ScalarField::zeros(grid).add_scalar(psi.mean()))?.inf_norm();
    Ok(worst / (spread + grid.hx() * grid.hx()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lift_symmetric;
    use crate::symmetric::{build_symmetric_flow, exit_acceleration};

    fn setup(nx: usize, ny: usize) -> (GasModel, NozzleProfile, ScalarField) {
        let gas = GasModel::new(1.4, 1.2).unwrap();
        let prof = NozzleProfile::new(0.25, 2.0).unwrap();
        let grid = StripGrid::new(nx, ny).unwrap();
        let flow = build_symmetric_flow(&gas, &prof, 16 * (nx - 1) + 1).unwrap();
        (gas, prof, lift_symmetric(&flow, grid))
    }

    #[test]
    fn symmetric_structure() {
        let (gas, prof, lift) = setup(33, 16);
        let c = assemble_linearized(&lift, &gas, &prof).unwrap();
        assert_eq!(c.a12.inf_norm(), 0.0);
        assert!(c.b2.inf_norm() < 1e-12);
        assert!(c.a11.min() >= 0.0);
        assert!(c.a22.min() > 0.0);
        let last = 32;
        let b1 = gas.sonic_speed().b1;
        for j in 0..16 {
            assert!(c.a11.at(last, j).abs() <= 10.0 * lift.grid().hx());
            assert!(c.a22.at(last, j) >= 0.5 * b1 * b1);
            assert!(c.a11.at(last - 1, j) > 0.0);
        }
        assert!(c.oblique.is_oblique());
        let zero = ScalarField::zeros(*lift.grid());
        assert_eq!(c.apply(&zero).unwrap().inf_norm(), 0.0);
    }

    #[test]
    fn exit_drift_closed_form() {
        let (gas, prof, lift) = setup(65, 16);
        let c = assemble_linearized(&lift, &gas, &prof).unwrap();
        let b1 = gas.sonic_speed().b1;
        let up = lift.dxx_at(64, 0);
        let closed = -(gas.gamma() + 1.0) * up * b1;
        for j in 0..16 {
            let v = c.b1.at(64, j);
            assert!((v - closed).abs() < 1e-3 * closed.abs(), "{v} vs {closed}");
        }
        // The discrete exit curvature tracks u'(1).
        assert!((up - exit_acceleration(&gas, &prof)).abs() < 2e-2);
        let r = check_exit_drift_sign(&c);
        assert!(r.pass && r.min_or_max < 0.0);
    }

    #[test]
    fn decelerating_exit_fails() {
        let (gas, prof, lift) = setup(33, 16);
        // Subtract a bump that reverses the exit curvature.
        let bad = ScalarField::from_fn(*lift.grid(), |x, _| 0.6 * (x - 1.0).powi(2));
        let phi = ScalarField::from_values(
            *lift.grid(),
            lift.values().iter().zip(bad.values()).map(|(a, b)| a - b).collect(),
        )
        .unwrap();
        assert!(phi.dxx_at(32, 0) < 0.0);
        let c = assemble_linearized(&phi, &gas, &prof).unwrap();
        assert!(!check_exit_drift_sign(&c).pass);
        let k = check_key_inequality(&phi, &gas).unwrap();
        assert!(!k.key.pass && !k.acceleration.pass);
    }

    #[test]
    fn zero_field_entry_drift() {
        let (gas, prof, lift) = setup(17, 8);
        let zero = ScalarField::zeros(*lift.grid());
        let c = assemble_linearized(&zero, &gas, &prof).unwrap();
        let n0 = prof.n(0.0);
        let dn0 = prof.dn(0.0);
        for j in 0..8 {
            let expect = n0 * dn0 * c.cb2.at(0, j);
            assert!((c.b1.at(0, j) - expect).abs() < 1e-14);
            assert!(c.b1.at(0, j) < 0.0);
        }
    }

    #[test]
    fn key_inequality_on_symmetric_flow() {
        let (gas, _, lift) = setup(65, 16);
        let k = check_key_inequality(&lift, &gas).unwrap();
        let up = lift.dxx_at(64, 0);
        assert!((k.key.min_or_max - 0.5 * (gas.gamma() + 1.0) * up).abs() < 1e-10);
        assert!(k.key.pass && k.acceleration.pass);
    }

    #[test]
    fn key_reduces_without_curvature() {
        let gas = GasModel::new(1.4, 1.2).unwrap();
        let grid = StripGrid::new(17, 16).unwrap();
        let phi = ScalarField::from_fn(grid, |x, y| 0.9 * x + 0.01 * y.sin());
        let k = check_key_inequality(&phi, &gas).unwrap();
        let expect = (0..16)
            .map(|j| 0.5 * (gas.gamma() - 1.0) * phi.dyy_at(16, j))
            .fold(f64::INFINITY, f64::min);
        assert!((k.key.min_or_max - expect).abs() < 1e-12);
        assert!(k.acceleration.min_or_max.abs() < 1e-10);
    }

    #[test]
    fn sign_report_json_keys() {
        let (gas, prof, lift) = setup(9, 8);
        let c = assemble_linearized(&lift, &gas, &prof).unwrap();
        let v = serde_json::to_value(check_exit_drift_sign(&c)).unwrap();
        for key in ["quantity", "min_or_max", "node_of_extremum", "pass"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
