//! Width profile `n(x) = 1 + a·(1−x)^p` of the approximate nozzle.
//!
//! Hypothesis (H1) asks for `n'' > 0` on `[0,1]`, `n' < 0` on `(0,1)` and
//! `n'(1) = 0`; the exit is normalized to `n(1) = 1`. Only `p = 2` meets
//! strict convexity at the exit, so the strict constructor accepts nothing
//! else. The lenient constructor exists to exercise the validator.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NozzleProfile {
    amplitude: f64,
    exponent: f64,
}

/// Sampled (H1) diagnostics. Each clause carries its own flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    pub samples: usize,
    pub min_second_derivative: f64,
    pub max_interior_first_derivative: f64,
    pub exit_slope_abs: f64,
    pub exit_value_error: f64,
    pub convex_ok: bool,
    pub decreasing_ok: bool,
    pub exit_slope_ok: bool,
    pub normalized_ok: bool,
}

impl H1Report {
    pub fn all_ok(&self) -> bool {
        self.convex_ok && self.decreasing_ok && self.exit_slope_ok && self.normalized_ok
    }
}

impl NozzleProfile {
    /// Strict constructor: `a > 0` and `p = 2`.
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(FlowError::HypothesisViolation(format!(
                "amplitude a = {a} must be positive"
            )));
        }
        if p != 2.0 {
            return Err(FlowError::HypothesisViolation(format!(
                "exponent p = {p}: n''(1) = 0 unless p = 2"
            )));
        }
        Ok(Self {
            amplitude: a,
            exponent: p,
        })
    }

    /// Accepts any finite amplitude and `p ≥ 2`; (H1) is then checked only
    /// by [`NozzleProfile::validate_h1`].
    pub fn lenient(a: f64, p: f64) -> Result<Self> {
        if !a.is_finite() || !(p.is_finite() && p >= 2.0) {
            return Err(FlowError::InvalidArgument(format!(
                "lenient profile needs finite a and p ≥ 2, got a = {a}, p = {p}"
            )));
        }
        Ok(Self {
            amplitude: a,
            exponent: p,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn n(&self, x: f64) -> f64 {
        1.0 + self.amplitude * (1.0 - x).powf(self.exponent)
    }

    pub fn dn(&self, x: f64) -> f64 {
        let p = self.exponent;
        -self.amplitude * p * (1.0 - x).powf(p - 1.0)
    }

    pub fn d2n(&self, x: f64) -> f64 {
        let p = self.exponent;
        self.amplitude * p * (p - 1.0) * (1.0 - x).powf(p - 2.0)
    }

    /// Samples `samples` uniform points of `[0,1]` and reports each (H1)
    /// clause.
    pub fn validate_h1(&self, samples: usize) -> Result<H1Report> {
        if samples < 3 {
            return Err(FlowError::InvalidArgument(format!(
                "validate_h1 needs at least 3 samples, got {samples}"
            )));
        }
        let last = (samples - 1) as f64;
        let mut min_d2 = f64::INFINITY;
        let mut max_d1 = f64::NEG_INFINITY;
        for k in 0..samples {
            let x = k as f64 / last;
            min_d2 = min_d2.min(self.d2n(x));
            if k > 0 && k + 1 < samples {
                max_d1 = max_d1.max(self.dn(x));
            }
        }
        let exit_slope_abs = self.dn(1.0).abs();
        let exit_value_error = (self.n(1.0) - 1.0).abs();
        Ok(H1Report {
            samples,
            min_second_derivative: min_d2,
            max_interior_first_derivative: max_d1,
            exit_slope_abs,
            exit_value_error,
            convex_ok: min_d2 > 0.0,
            decreasing_ok: max_d1 < 0.0,
            exit_slope_ok: exit_slope_abs < 1e-14,
            normalized_ok: exit_value_error < 1e-14,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_profile_values() {
        let p = NozzleProfile::new(0.25, 2.0).unwrap();
        assert_eq!(p.n(0.0), 1.25);
        assert_eq!(p.n(1.0), 1.0);
        assert_eq!(p.dn(1.0), 0.0);
        assert_eq!(p.dn(0.0), -0.5);
        for x in [0.0, 0.3, 0.99, 1.0] {
            assert_eq!(p.d2n(x), 0.5);
        }
        let q = NozzleProfile::new(0.1, 2.0).unwrap();
        assert!((q.n(0.5) - 1.025).abs() < 1e-15);
    }

    #[test]
    fn strict_constructor_rejects() {
        assert!(matches!(
            NozzleProfile::new(0.25, 3.0),
            Err(FlowError::HypothesisViolation(_))
        ));
        assert!(matches!(
            NozzleProfile::new(-0.1, 2.0),
            Err(FlowError::HypothesisViolation(_))
        ));
        assert!(NozzleProfile::lenient(0.1, 1.5).is_err());
    }

    #[test]
    fn h1_passes_for_quadratic() {
        let r = NozzleProfile::new(0.25, 2.0).unwrap().validate_h1(101).unwrap();
        assert!(r.all_ok(), "{r:?}");
        assert!(NozzleProfile::new(0.25, 2.0).unwrap().validate_h1(2).is_err());
    }

    #[test]
    fn h1_flags_negative_amplitude() {
        let r = NozzleProfile::lenient(-0.1, 2.0).unwrap().validate_h1(101).unwrap();
        assert!(!r.convex_ok);
        assert!(!r.decreasing_ok);
        assert!(r.min_second_derivative < 0.0);
    }

    #[test]
    fn h1_flags_flat_exit_curvature() {
        let r = NozzleProfile::lenient(0.25, 3.0).unwrap().validate_h1(101).unwrap();
        assert!(!r.convex_ok);
        assert_eq!(r.min_second_derivative, 0.0);
        assert!(r.decreasing_ok && r.exit_slope_ok && r.normalized_ok);
    }

    #[test]
    fn width_at_least_one() {
        let p = NozzleProfile::new(0.25, 2.0).unwrap();
        for k in 0..1000 {
            let x = k as f64 / 1000.0;
            assert!(p.n(x) > 1.0);
        }
        assert_eq!(p.n(1.0), 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = NozzleProfile::new(0.25, 2.0).unwrap();
        let p4 = NozzleProfile::lenient(0.3, 4.0).unwrap();
        for prof in [p, p4] {
            let x = 0.4;
            let err = |h: f64| {
                let d1 = (prof.n(x + h) - prof.n(x - h)) / (2.0 * h);
                (d1 - prof.dn(x)).abs()
            };
            let err2 = |h: f64| {
                let d2 = (prof.n(x + h) - 2.0 * prof.n(x) + prof.n(x - h)) / (h * h);
                (d2 - prof.d2n(x)).abs()
            };
            // Central differences of a quadratic are exact.
            if prof.exponent() == 2.0 {
                assert!(err(1e-2) < 1e-12 && err2(1e-2) < 1e-9);
            } else {
                let ratio = err(1e-2) / err(5e-3);
                assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
                let ratio2 = err2(1e-2) / err2(5e-3);
                assert!((ratio2 - 4.0).abs() < 0.5, "ratio {ratio2}");
            }
        }
    }
}
