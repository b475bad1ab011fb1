//! Isentropic gas closure for `p = ρ^γ`.
//!
//! Bernoulli: `c²/(γ−1) + q²/2 = c₀/(γ−1)`, so `c² = c₀ − (γ−1)/2·q²` and
//! `ρ = (c²/γ)^(1/(γ−1))`. The mass-flux density `g(q) = ρ(q)·q` peaks at
//! the critical speed `b₁ = sqrt(2c₀/(γ+1))`, where `q = c`.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::roots;

/// Ratio of specific heats `gamma > 1` and Bernoulli constant `c0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    gamma: f64,
    c0: f64,
}

/// Sonic (critical) state of a [`GasModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    /// Critical speed, `b1² = 2·c0/(γ+1)`.
    pub b1: f64,
    /// Density at the critical speed.
    pub rho_star: f64,
    /// Maximum mass-flux density `rho_star · b1`.
    pub flux_star: f64,
}

impl GasModel {
    pub fn new(gamma: f64, c0: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(FlowError::InvalidGas(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(FlowError::InvalidGas(format!("c0 must be positive, got {c0}")));
        }
        Ok(Self { gamma, c0 })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Speed at which `c² = 0`.
    pub fn limit_speed(&self) -> f64 {
        (2.0 * self.c0 / (self.gamma - 1.0)).sqrt()
    }

    /// `c²` as a function of the squared speed. Rejects non-positive results
    /// instead of clamping them.
    pub fn sound_speed_squared_from_sq(&self, q_sq: f64) -> Result<f64> {
        if !(q_sq.is_finite() && q_sq >= 0.0) {
            return Err(FlowError::InvalidSpeed(q_sq));
        }
        let c2 = self.c0 - 0.5 * (self.gamma - 1.0) * q_sq;
        if c2 <= 0.0 {
            return Err(FlowError::SpeedExceedsLimit {
                speed: q_sq.sqrt(),
                limit: self.limit_speed(),
                c2,
            });
        }
        Ok(c2)
    }

    pub fn sound_speed_squared(&self, q: f64) -> Result<f64> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(FlowError::InvalidSpeed(q));
        }
        self.sound_speed_squared_from_sq(q * q)
    }

    /// Density from the state relation `c² = γ ρ^(γ−1)`.
    pub fn density(&self, q: f64) -> Result<f64> {
        let c2 = self.sound_speed_squared(q)?;
        Ok(self.density_from_c2(c2))
    }

    pub(crate) fn density_from_c2(&self, c2: f64) -> f64 {
        (c2 / self.gamma).powf(1.0 / (self.gamma - 1.0))
    }

    /// Mass-flux density `g(q) = ρ(q)·q`.
    pub fn flux_density(&self, q: f64) -> Result<f64> {
        Ok(self.density(q)? * q)
    }

    /// `g'(q) = ρ·(1 − q²/c²)`.
    pub fn flux_density_derivative(&self, q: f64) -> Result<f64> {
        let c2 = self.sound_speed_squared(q)?;
        Ok(self.density_from_c2(c2) * (1.0 - q * q / c2))
    }

    pub fn mach(&self, q: f64) -> Result<f64> {
        let c2 = self.sound_speed_squared(q)?;
        Ok(q / c2.sqrt())
    }

    /// Critical data (the sonic exit state).
    pub fn sonic_speed(&self) -> CriticalData {
        let b1 = (2.0 * self.c0 / (self.gamma + 1.0)).sqrt();
        // c² = b1² at the critical speed.
        let rho_star = self.density_from_c2(b1 * b1);
        CriticalData {
            b1,
            rho_star,
            flux_star: rho_star * b1,
        }
    }

    /// Normalized residual of the entry-speed relation
    /// `b^(γ−1)·(c0 − (γ−1)/2·b²)·n0^(γ−1) = b1^(γ+1)`, divided by `b1^(γ+1)`.
    pub fn entry_relation_residual(&self, b: f64, n0: f64) -> f64 {
        let g = self.gamma;
        let b1 = self.sonic_speed().b1;
        let lhs = b.powf(g - 1.0) * (self.c0 - 0.5 * (g - 1.0) * b * b) * n0.powf(g - 1.0);
        lhs / b1.powf(g + 1.0) - 1.0
    }

    fn entry_relation_derivative(&self, b: f64, n0: f64) -> f64 {
        let g = self.gamma;
        let b1 = self.sonic_speed().b1;
        let c2 = self.c0 - 0.5 * (g - 1.0) * b * b;
        let d = (g - 1.0) * b.powf(g - 2.0) * c2 - (g - 1.0) * b.powf(g);
        d * n0.powf(g - 1.0) / b1.powf(g + 1.0)
    }

    fn check_entry_width(&self, n0: f64) -> Result<()> {
        if !n0.is_finite() || n0 < 1.0 {
            return Err(FlowError::NoSubsonicRoot(format!(
                "entry width n0 = {n0} < 1: the sonic flux cannot be matched on the subsonic branch"
            )));
        }
        Ok(())
    }

    /// The subsonic entry speed `b0 ∈ (0, b1]` of a nozzle with entry width
    /// `n0` and unit exit width.
    ///
    /// Bisection over the subsonic branch, followed by a Newton polish that
    /// is kept only if it lowers the residual.
    pub fn entry_speed(&self, n0: f64) -> Result<f64> {
        self.check_entry_width(n0)?;
        let b1 = self.sonic_speed().b1;
        if n0 == 1.0 {
            return Ok(b1);
        }
        let f = |b: f64| self.entry_relation_residual(b, n0);
        let mut b0 = roots::bisect(f, 0.0, b1, 200)?;
        let slope = self.entry_relation_derivative(b0, n0);
        if slope > 0.0 {
            let polished = b0 - f(b0) / slope;
            if polished > 0.0 && polished <= b1 && f(polished).abs() < f(b0).abs() {
                b0 = polished;
            }
        }
        self.finish_entry(b0, n0)
    }

    /// Same root as [`GasModel::entry_speed`], found by safeguarded Newton
    /// started from the midpoint of the subsonic branch.
    pub fn entry_speed_newton(&self, n0: f64) -> Result<f64> {
        self.check_entry_width(n0)?;
        let b1 = self.sonic_speed().b1;
        if n0 == 1.0 {
            return Ok(b1);
        }
        let b0 = roots::safeguarded_newton(
            |b| self.entry_relation_residual(b, n0),
            |b| self.entry_relation_derivative(b, n0),
            0.0,
            b1,
            0.5 * b1,
            1e-15,
            500,
        )?;
        self.finish_entry(b0, n0)
    }

    fn finish_entry(&self, b0: f64, n0: f64) -> Result<f64> {
        let residual = self.entry_relation_residual(b0, n0).abs();
        if residual > 1e-12 {
            return Err(FlowError::ToleranceNotReached {
                iterations: 200,
                residual,
            });
        }
        Ok(b0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn air() -> GasModel {
        GasModel::new(1.4, 1.2).unwrap()
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(matches!(GasModel::new(0.9, 1.2), Err(FlowError::InvalidGas(_))));
        assert!(matches!(GasModel::new(1.0, 1.2), Err(FlowError::InvalidGas(_))));
        assert!(matches!(GasModel::new(1.4, 0.0), Err(FlowError::InvalidGas(_))));
    }

    #[test]
    fn sound_speed_examples() {
        let gas = air();
        assert_eq!(gas.sound_speed_squared(0.0).unwrap(), 1.2);
        assert_relative_eq!(gas.sound_speed_squared(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(gas.sound_speed_squared(0.588).unwrap(), 1.1308512, epsilon = 1e-14);
    }

    #[test]
    fn limit_speed_is_rejected() {
        let gas = air();
        let qmax = gas.limit_speed();
        assert!(qmax > gas.sonic_speed().b1);
        assert!(matches!(
            gas.sound_speed_squared(qmax * (1.0 + 1e-12)),
            Err(FlowError::SpeedExceedsLimit { .. })
        ));
        assert!(matches!(gas.density(10.0), Err(FlowError::SpeedExceedsLimit { .. })));
        assert!(matches!(gas.mach(-1.0), Err(FlowError::InvalidSpeed(_))));
    }

    #[test]
    fn density_examples() {
        let gas = air();
        // 40-digit reference values.
        assert_relative_eq!(gas.density(1.0).unwrap(), 0.431_201_150_371_692_1, epsilon = 1e-14);
        assert_relative_eq!(gas.density(0.0).unwrap(), 0.680_194_359_016_568_4, epsilon = 1e-14);
        // c²(q) = γ gives ρ = 1: γ=2, c0=2.5 at q=1.
        let g2 = GasModel::new(2.0, 2.5).unwrap();
        assert_relative_eq!(g2.density(1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn flux_examples() {
        let gas = air();
        assert_eq!(gas.flux_density(0.0).unwrap(), 0.0);
        let crit = gas.sonic_speed();
        assert_relative_eq!(gas.flux_density(1.0).unwrap(), crit.flux_star, epsilon = 1e-15);
        assert_relative_eq!(crit.flux_star, 0.431_201_150_371_692_1, epsilon = 1e-14);
        let (a, b, c) = (
            gas.flux_density(0.5).unwrap(),
            gas.flux_density(0.9).unwrap(),
            gas.flux_density(1.0).unwrap(),
        );
        assert_relative_eq!(a, 0.305_769_748_492_064_3, epsilon = 1e-14);
        assert_relative_eq!(b, 0.426_006_086_459_329_6, epsilon = 1e-14);
        assert!(a < b && b < c);
    }

    #[test]
    fn critical_data() {
        let crit = air().sonic_speed();
        assert_eq!(crit.b1, 1.0);
        let crit = GasModel::new(2.0, 3.0).unwrap().sonic_speed();
        assert_relative_eq!(crit.b1, 2f64.sqrt(), epsilon = 1e-15);
        let gas = air();
        let crit = gas.sonic_speed();
        assert_relative_eq!(
            crit.rho_star,
            (crit.b1 * crit.b1 / gas.gamma()).powf(1.0 / (gas.gamma() - 1.0)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn mach_examples() {
        let gas = air();
        assert_eq!(gas.mach(0.0).unwrap(), 0.0);
        assert_eq!(gas.mach(1.0).unwrap(), 1.0);
        assert_relative_eq!(gas.mach(0.588).unwrap(), 0.588 / 1.1308512f64.sqrt(), epsilon = 1e-14);
        assert!((gas.mach(0.588).unwrap() - 0.553).abs() < 5e-4);
    }

    #[test]
    fn entry_speed_examples() {
        let gas = air();
        assert_eq!(gas.entry_speed(1.0).unwrap(), 1.0);
        let b0 = gas.entry_speed(1.25).unwrap();
        assert!((b0 - 0.588_388_334_793_845_3).abs() < 1e-12);
        assert!(gas.entry_relation_residual(b0, 1.25).abs() <= 1e-12);
        let b0n = gas.entry_speed_newton(1.25).unwrap();
        assert!((b0 - b0n).abs() < 1e-10);
    }

    #[test]
    fn entry_speed_divergent_nozzle() {
        assert!(matches!(air().entry_speed(0.9), Err(FlowError::NoSubsonicRoot(_))));
        assert!(matches!(air().entry_speed_newton(0.9), Err(FlowError::NoSubsonicRoot(_))));
    }

    #[test]
    fn entry_speed_approaches_sonic() {
        let gas = air();
        let b_a = gas.entry_speed(1.0 + 1e-2).unwrap();
        let b_b = gas.entry_speed(1.0 + 1e-4).unwrap();
        assert!((b_a - 0.909_339_969_264_813_5).abs() < 1e-10);
        assert!((b_b - 0.990_874_420_077_479_8).abs() < 1e-8);
        assert!(b_a < b_b && b_b < 1.0);
    }
}
