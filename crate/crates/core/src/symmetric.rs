//! The y-independent subsonic–sonic flow `φ_b(x)`.
//!
//! With `u = φ_b'`, mass conservation reads `n(x)·ρ(u)·u = m`. The exit is
//! sonic (`u(1) = b1`, `n(1) = 1`), which fixes `m` to the maximal flux
//! density `ρ*·b1`. Every other station solves the same relation on the
//! subsonic branch, so the profile is grid-free.
//!
//! The flux density is flat at `b1` (`g'(b1) = 0`), so near the exit a flux
//! residual of `1e-12` only pins the speed to about `1e-6`. Stations at
//! `x = 1` return `b1` exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::gasdyn::GasModel;
use crate::nozzle::NozzleProfile;
use crate::roots;

/// Conserved mass flux `n(1)·ρ(b1)·b1`.
pub fn critical_flux(gas: &GasModel, profile: &NozzleProfile) -> f64 {
    profile.n(1.0) * gas.sonic_speed().flux_star
}

/// Flow speed at station `x` on the subsonic branch.
pub fn speed_at(gas: &GasModel, profile: &NozzleProfile, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(FlowError::InvalidArgument(format!("station x = {x} outside [0, 1]")));
    }
    let b1 = gas.sonic_speed().b1;
    if x == 1.0 {
        return Ok(b1);
    }
    let m = critical_flux(gas, profile);
    let n = profile.n(x);
    if n < 1.0 {
        return Err(FlowError::NoSubsonicRoot(format!("n({x}) = {n} < 1")));
    }
    // b1 < q_max, so the flux density is defined on the whole bracket.
    let residual = |u: f64| (n * gas.flux_density(u).unwrap_or(f64::NAN) - m) / m;
    let u = roots::bisect(residual, 0.0, b1, 200)?;
    let r = residual(u).abs();
    if !(r <= 1e-12) {
        return Err(FlowError::ToleranceNotReached {
            iterations: 200,
            residual: r,
        });
    }
    Ok(u)
}

/// `u'(1) = b1·sqrt(n''(1)/(γ+1))`, the limit of `u'(x)` at the sonic exit.
///
/// Both `n'` and `g'(u)` vanish there; expanding `n·g(u) = m` to second
/// order with `g''(b1) = −ρ*(γ+1)/b1` gives the expression above.
pub fn exit_acceleration(gas: &GasModel, profile: &NozzleProfile) -> f64 {
    let b1 = gas.sonic_speed().b1;
    b1 * (profile.d2n(1.0) / (gas.gamma() + 1.0)).sqrt()
}

/// `u'(x) = −n'·g(u) / (n·g'(u))`, switching to the exit limit within
/// `1e-6` of `x = 1`.
pub fn acceleration_at(gas: &GasModel, profile: &NozzleProfile, x: f64) -> Result<f64> {
    if 1.0 - x < 1e-6 {
        return Ok(exit_acceleration(gas, profile));
    }
    let u = speed_at(gas, profile, x)?;
    let g = gas.flux_density(u)?;
    let dg = gas.flux_density_derivative(u)?;
    Ok(-profile.dn(x) * g / (profile.n(x) * dg))
}

/// Sampled symmetric flow on uniform stations of `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricFlow {
    pub xs: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
    pub cs: Vec<f64>,
    pub mach: Vec<f64>,
    /// Potential with the gauge `phi_b(0) = 0`.
    pub phi_b: Vec<f64>,
    /// Conserved mass flux `n·ρ·u`.
    pub m: f64,
}

/// Invariant diagnostics of a [`SymmetricFlow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricChecks {
    pub max_flux_rel_error: f64,
    pub strictly_increasing: bool,
    pub max_interior_mach: f64,
    pub exit_mach_error: f64,
    pub entry_speed_error: f64,
    pub max_bernoulli_error: f64,
}

impl SymmetricChecks {
    pub fn all_ok(&self) -> bool {
        self.max_flux_rel_error <= 1e-10
            && self.strictly_increasing
            && self.max_interior_mach < 1.0
            && self.exit_mach_error <= 1e-6
            && self.entry_speed_error <= 1e-10
            && self.max_bernoulli_error <= 1e-13
    }
}

pub fn build_symmetric_flow(
    gas: &GasModel,
    profile: &NozzleProfile,
    stations: usize,
) -> Result<SymmetricFlow> {
    if stations < 2 {
        return Err(FlowError::InvalidArgument(format!(
            "need at least 2 stations, got {stations}"
        )));
    }
    let last = (stations - 1) as f64;
    let xs: Vec<f64> = (0..stations).map(|k| k as f64 / last).collect();
    let u = xs
        .iter()
        .map(|&x| speed_at(gas, profile, x))
        .collect::<Result<Vec<_>>>()?;
    let mut rho = Vec::with_capacity(stations);
    let mut cs = Vec::with_capacity(stations);
    let mut mach = Vec::with_capacity(stations);
    for &q in &u {
        let c2 = gas.sound_speed_squared(q)?;
        rho.push(gas.density(q)?);
        cs.push(c2.sqrt());
        mach.push(q / c2.sqrt());
    }
    let phi_b = cumulative_integral(&u, 1.0 / last);
    Ok(SymmetricFlow {
        xs,
        u,
        rho,
        cs,
        mach,
        phi_b,
        m: critical_flux(gas, profile),
    })
}

/// Cumulative integral from the first sample. Composite Simpson when the
/// number of intervals is even (odd stations get the one-panel
/// `h/12·(5f₀ + 8f₁ − f₂)` rule), trapezoid otherwise.
fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if (n - 1) % 2 != 0 {
        for k in 1..n {
            out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
        }
        return out;
    }
    let mut k = 2;
    while k < n {
        out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
        out[k - 1] = out[k - 2] + h / 12.0 * (5.0 * f[k - 2] + 8.0 * f[k - 1] - f[k]);
        k += 2;
    }
    out
}

impl SymmetricFlow {
    pub fn stations(&self) -> usize {
        self.xs.len()
    }

    /// Cubic (four-point Lagrange) interpolation of `phi_b`; reproduces the
    /// station values exactly.
    pub fn phi_at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let last = (n - 1) as f64;
        let pos = (x * last).clamp(0.0, last);
        let k = pos.round() as usize;
        if (pos - k as f64).abs() < 1e-12 {
            return self.phi_b[k];
        }
        if n < 4 {
            // Linear fallback between neighbouring stations.
            let k0 = (pos.floor() as usize).min(n - 2);
            let t = pos - k0 as f64;
            return (1.0 - t) * self.phi_b[k0] + t * self.phi_b[k0 + 1];
        }
        let start = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let mut value = 0.0;
        for a in start..start + 4 {
            let mut w = 1.0;
            for b in start..start + 4 {
                if a != b {
                    w *= (pos - b as f64) / (a as f64 - b as f64);
                }
            }
            value += w * self.phi_b[a];
        }
        value
    }

    pub fn check(&self, gas: &GasModel, profile: &NozzleProfile) -> Result<SymmetricChecks> {
        let mut max_flux = 0.0f64;
        let mut max_bern = 0.0f64;
        let mut max_interior_mach = 0.0f64;
        for k in 0..self.stations() {
            let flux = profile.n(self.xs[k]) * self.rho[k] * self.u[k];
            max_flux = max_flux.max(((flux - self.m) / self.m).abs());
            let bern = self.cs[k] * self.cs[k] + 0.5 * (gas.gamma() - 1.0) * self.u[k] * self.u[k];
            max_bern = max_bern.max((bern - gas.c0()).abs());
            if k + 1 < self.stations() {
                max_interior_mach = max_interior_mach.max(self.mach[k]);
            }
        }
        let b0 = gas.entry_speed(profile.n(0.0))?;
        Ok(SymmetricChecks {
            max_flux_rel_error: max_flux,
            strictly_increasing: self.u.windows(2).all(|w| w[1] > w[0]),
            max_interior_mach,
            exit_mach_error: (self.mach[self.stations() - 1] - 1.0).abs(),
            entry_speed_error: (self.u[0] - b0).abs(),
            max_bernoulli_error: max_bern,
        })
    }

    /// CSV with header `x,u,rho,c,mach,phi` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,u,rho,c,mach,phi")?;
        for k in 0..self.stations() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.xs[k], self.u[k], self.rho[k], self.cs[k], self.mach[k], self.phi_b[k]
            )?;
        }
        Ok(())
    }
}
