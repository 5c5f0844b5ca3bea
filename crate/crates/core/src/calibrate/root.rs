//! Bracketed scalar root finding.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

/// Root of an increasing `f` on `[lo, hi]`: bisection until the bracket is
/// narrower than `bisect_width`, then secant steps (falling back to
/// bisection when a step leaves the bracket) until `done(x)` holds.
pub fn bisect_then_secant(
    f: impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    bisect_width: f64,
    done: impl Fn(f64, f64) -> bool,
    max_iter: usize,
) -> Result<Root> {
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::Numerical(format!(
            "root not bracketed on [{lo}, {hi}]: f = ({f_lo:e}, {f_hi:e})"
        )));
    }
    let bracket = (lo, hi);
    let mut iterations = 0;
    while hi - lo > bisect_width {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if done(mid, fm) {
            return Ok(Root { x: mid, iterations, bracket });
        }
        if fm < 0.0 {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
    }
    while iterations < max_iter {
        iterations += 1;
        let mut x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) || !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if done(x, fx) {
            return Ok(Root { x, iterations, bracket });
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
    }
    Err(Error::Numerical(format!(
        "root finder exhausted {max_iter} iterations within [{lo}, {hi}]"
    )))
}

/// Plain bisection to absolute width `tol` for an increasing `f`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::Numerical(format!("root not bracketed on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
