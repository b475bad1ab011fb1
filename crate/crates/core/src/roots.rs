//! Scalar root finders for monotone residuals on a bracket.

use crate::error::{FlowError, Result};

/// Bisection on `[lo, hi]` for a function that changes sign across the
/// bracket. Iterates until the bracket collapses to adjacent floats or the
/// residual is exactly zero, then returns the endpoint with the smaller
/// residual magnitude.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(FlowError::NoSubsonicRoot(format!(
            "residual does not change sign on [{lo}, {hi}] ({f_lo:e}, {f_hi:e})"
        )));
    }
    let mut f_hi = f_hi;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// Newton's method kept inside a sign-changing bracket: any iterate that
/// leaves the bracket, or fails to shrink it fast enough, is replaced by a
/// bisection step.
pub fn safeguarded_newton<F, D>(
    f: F,
    df: D,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(FlowError::NoSubsonicRoot(format!(
            "residual does not change sign on [{lo}, {hi}]"
        )));
    }
    let lo_sign = f_lo.signum();
    let mut x = x0.clamp(lo, hi);
    let mut fx = f(x);
    for _ in 0..max_iter {
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx.signum() == lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        let slope = df(x);
        let newton = x - fx / slope;
        let next = if slope != 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= f64::EPSILON * hi.abs() {
            return Ok(next);
        }
        x = next;
        fx = f(x);
    }
    if fx.abs() <= tol {
        Ok(x)
    } else {
        Err(FlowError::ToleranceNotReached {
            iterations: max_iter,
            residual: fx.abs(),
        })
    }
}
