//! Closed-form run-length analytics for the windowed stopping rule: the
//! Gumbel-limit run-length distribution, the average run length as a
//! function of the threshold, threshold calibration, the detection-delay
//! upper bound and the minimum detectable change.

pub mod quadrature;
pub mod root;

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// `log(4 / sqrt(pi))`.
const LOG_FOUR_OVER_SQRT_PI: f64 = 0.813_929_418_195_190_5;

/// `H exp(-a^2/2)` above this is flagged as outside the asymptotic regime.
pub const REGIME_WARNING_LEVEL: f64 = 0.1;

/// Default search interval for the threshold.
pub const THRESHOLD_BRACKET: (f64, f64) = (0.5, 12.0);

/// Relative residual `|ARL(a) / target - 1|` accepted by the solver.
pub const ARL_RELATIVE_TOLERANCE: f64 = 1e-6;

#[inline]
fn g_of_log(u: f64, a: f64) -> f64 {
    2.0 * u + 0.5 * u.ln() + LOG_FOUR_OVER_SQRT_PI - a * (2.0 * u).sqrt()
}

/// `g(x, a) = 2 log x + (1/2) log log x + log(4/sqrt(pi)) - a sqrt(2 log x)`
/// for `x = t/H > 1`.
pub fn g_value<T: Real>(t_over_h: T, a: T) -> Result<T> {
    let x = t_over_h.to_f64_lossy();
    if !(x > 1.0) {
        return Err(Error::Precondition(format!(
            "g is defined for t/H > 1, got {x}"
        )));
    }
    Ok(T::of(g_of_log(x.ln(), a.to_f64_lossy())))
}

/// `P(T <= H)`: the run-length mass inside the first window.
pub fn boundary_mass<T: Real>(h: usize, a: T) -> T {
    let a = a.to_f64_lossy();
    let m = h as f64 * (-0.5 * a * a).exp() / (2.0 * core::f64::consts::PI.sqrt());
    T::of(m.min(1.0))
}

/// Asymptotic run-length CDF `P(T <= t)` under no change.
///
/// For `t > H` this is the Gumbel form `1 - exp(-2 exp(g(t/H, a)))`. On
/// `[0, H]` the total mass `P(T <= H)` is spread linearly in `t`. The two
/// pieces do not join continuously: just above `H` the Gumbel form starts
/// near zero. For `a > sqrt(8)` the Gumbel form also dips before
/// [`gumbel_monotone_from`]`(a) * H`.
pub fn run_length_cdf<T: Real>(t: T, h: usize, a: T) -> Result<T> {
    let tf = t.to_f64_lossy();
    if h == 0 || !(tf >= 0.0) || !(a.to_f64_lossy() > 0.0) {
        return Err(Error::Precondition(format!(
            "run-length CDF needs t >= 0, H >= 1, a > 0 (got t={tf}, H={h}, a={a})"
        )));
    }
    let hf = h as f64;
    if tf <= hf {
        let mass = boundary_mass::<f64>(h, a.to_f64_lossy());
        return Ok(T::of((tf / hf * mass).min(1.0)));
    }
    let g = g_of_log((tf / hf).ln(), a.to_f64_lossy());
    Ok(T::of(-(-2.0 * g.exp()).exp_m1()))
}

/// Smallest `t/H` beyond which the Gumbel branch is non-decreasing.
///
/// `dg/du = 2 + 1/(2u) - a/sqrt(2u)` with `u = log(t/H)`; writing
/// `y = 1/sqrt(2u)` this is `y^2 - a y + 2`, negative between its roots when
/// `a > sqrt(8)`.
pub fn gumbel_monotone_from(a: f64) -> f64 {
    let disc = a * a - 8.0;
    if disc <= 0.0 {
        return 1.0;
    }
    let y_low = 0.5 * (a - disc.sqrt());
    let u = 0.5 / (y_low * y_low);
    u.exp()
}

/// Theoretical average run length
/// `H + integral_H^inf exp(-2 exp(g(t/H, a))) dt`.
///
/// Integrated in `u = log(t/H)`, where the integrand is
/// `H exp(u - 2 exp(g))`, over doubling panels until a panel contributes
/// less than `1e-12` of the running total.
pub fn theoretical_arl<T: Real>(a: T, h: usize) -> Result<T> {
    arl_f64(a.to_f64_lossy(), h).map(T::of)
}

fn arl_f64(a: f64, h: usize) -> Result<f64> {
    if !(a > 0.0) || h == 0 {
        return Err(Error::Numerical(format!(
            "average run length needs a > 0 and H >= 1 (got a={a}, H={h})"
        )));
    }
    let hf = h as f64;
    let log_h = hf.ln();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return hf;
        }
        (log_h + u - 2.0 * g_of_log(u, a).exp()).exp()
    };
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..40 {
        let panel = quadrature::integrate(integrand, lo, hi, 1e-12, 0.0)?;
        total += panel;
        if panel <= 1e-12 * total && integrand(hi) <= 1e-14 * total {
            return Ok(hf + total);
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::Numerical(format!(
        "average run length integral did not converge for a={a}, H={h}"
    )))
}

/// Threshold calibrated to a target average run length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CalibrationResult<T> {
    pub target_arl: T,
    pub window: usize,
    pub threshold: T,
    pub achieved_arl: T,
    pub solver_iterations: usize,
    pub bracket: (T, T),
    /// `H exp(-a^2/2)` exceeds [`REGIME_WARNING_LEVEL`].
    pub regime_warning: bool,
}

/// Solves `theoretical_arl(a, H) = target_arl` for `a`.
pub fn solve_threshold<T: Real>(target_arl: T, h: usize) -> Result<CalibrationResult<T>> {
    let target = target_arl.to_f64_lossy();
    if h == 0 {
        return Err(Error::Config("window must be positive".into()));
    }
    if !(target > h as f64) {
        return Err(Error::Infeasible(format!(
            "target ARL {target} must exceed the window {h}"
        )));
    }
    let f = |a: f64| -> Result<f64> { Ok((arl_f64(a, h)? / target).ln()) };

    let (mut lo, mut hi) = THRESHOLD_BRACKET;
    while f(lo)? > 0.0 {
        if lo < 1e-3 {
            return Err(Error::Infeasible(format!(
                "target ARL {target} is below the smallest reachable ARL for H={h}"
            )));
        }
        lo *= 0.5;
    }
    while f(hi)? < 0.0 {
        if hi > 100.0 {
            return Err(Error::Infeasible(format!(
                "target ARL {target} needs a threshold above {hi}"
            )));
        }
        hi *= 2.0;
    }
    let tol = ARL_RELATIVE_TOLERANCE.ln_1p();
    let root = root::bisect_then_secant(f, lo, hi, 1e-3, |_, fx| fx.abs() <= tol, 200)?;
    let a = root.x;
    let achieved = arl_f64(a, h)?;
    let regime_warning = h as f64 * (-0.5 * a * a).exp() > REGIME_WARNING_LEVEL;
    if regime_warning {
        log::warn!(
            "threshold {a:.4} with window {h} is outside the asymptotic regime (H exp(-a^2/2) = {:.3})",
            h as f64 * (-0.5 * a * a).exp()
        );
    }
    Ok(CalibrationResult {
        target_arl,
        window: h,
        threshold: T::of(a),
        achieved_arl: T::of(achieved),
        solver_iterations: root.iterations,
        bracket: (T::of(root.bracket.0), T::of(root.bracket.1)),
        regime_warning,
    })
}

/// Upper bound on the detection delay of an immediate change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EddBound<T> {
    pub m: usize,
    pub window: usize,
    pub threshold: T,
    pub null_sd: T,
    pub change_norm: T,
    /// Infinite when `change_norm` is zero.
    pub bound: T,
}

impl<T: Real> EddBound<T> {
    pub fn is_finite(&self) -> bool {
        self.bound.is_finite()
    }
}

/// `(M + 2) + sqrt(a H sd) / ||Sigma_after - Sigma_before||_F`, with `sd` the
/// population null standard deviation of the windowed statistic.
pub fn edd_upper_bound<T: Real>(a: T, h: usize, m: usize, null_sd: T, change_norm: T) -> Result<EddBound<T>> {
    if !(a > T::zero()) || h == 0 || !(null_sd > T::zero()) || change_norm < T::zero() {
        return Err(Error::Config(format!(
            "EDD bound needs a > 0, H > 0, sd > 0, norm >= 0 (got a={a}, H={h}, sd={null_sd}, norm={change_norm})"
        )));
    }
    let base = T::of_usize(m + 2);
    let bound = if change_norm == T::zero() {
        T::infinity()
    } else {
        base + (a * T::of_usize(h) * null_sd).sqrt() / change_norm
    };
    Ok(EddBound {
        m,
        window: h,
        threshold: a,
        null_sd,
        change_norm,
        bound,
    })
}

/// Smallest Frobenius-norm change `sqrt(a/H) ||Sigma_before||_F` the rule can
/// pick up before the pre-change observations leave the window.
pub fn min_detectable_change<T: Real>(a: T, h: usize, base_norm: T) -> T {
    (a / T::of_usize(h)).sqrt() * base_norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_collapses_at_e() {
        let e = core::f64::consts::E;
        let g0 = g_value(e, 0.0).unwrap();
        assert!((g0 - (2.0 + (4.0 / core::f64::consts::PI.sqrt()).ln())).abs() < 1e-14);
        assert!((g0 - 2.8139).abs() < 1e-4);
        let g = g_value(e, 1.7).unwrap();
        assert!((g - (g0 - 1.7 * 2f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn g_domain() {
        assert!(g_value(1.0, 3.0).is_err());
        assert!(g_value(0.5_f32, 3.0).is_err());
    }

    #[test]
    fn g_decreasing_in_threshold() {
        for &x in &[1.01, 2.0, 50.0] {
            let mut prev = f64::INFINITY;
            for k in 0..20 {
                let g = g_value(x, 0.5 + 0.25 * k as f64).unwrap();
                assert!(g < prev);
                prev = g;
            }
        }
    }

    #[test]
    fn boundary_mass_example() {
        let v = run_length_cdf(100.0, 100, 3.58).unwrap();
        let expected = 100.0 * (-3.58f64 * 3.58 / 2.0).exp() / (2.0 * core::f64::consts::PI.sqrt());
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.0465).abs() < 5e-4);
    }

    #[test]
    fn cdf_tends_to_one() {
        let v = run_length_cdf(1e12, 100, 3.58).unwrap();
        assert!(v > 1.0 - 1e-12);
    }

    #[test]
    fn cdf_rejects_bad_inputs() {
        assert!(run_length_cdf(-1.0, 100, 3.0).is_err());
        assert!(run_length_cdf(1.0, 0, 3.0).is_err());
        assert!(run_length_cdf(1.0, 10, 0.0).is_err());
    }

    #[test]
    fn gumbel_branch_dips_above_sqrt_eight() {
        // The dip is a property of the asymptotic form itself.
        let a = 3.58;
        let lo = run_length_cdf(106.0, 100, a).unwrap();
        let hi = run_length_cdf(250.0, 100, a).unwrap();
        assert!(lo > hi);
        assert_eq!(gumbel_monotone_from(2.5), 1.0);
        assert!(gumbel_monotone_from(a) > 2.5);
    }

    #[test]
    fn arl_table_one_spot_check() {
        let v: f64 = theoretical_arl(3.04, 100).unwrap();
        assert!((v - 1002.0).abs() / 1002.0 < 0.01, "{v}");
    }

    #[test]
    fn arl_rejects_nonpositive_threshold() {
        assert!(matches!(theoretical_arl(0.0, 100), Err(Error::Numerical(_))));
    }

    #[test]
    fn solve_rejects_target_at_window() {
        assert!(matches!(solve_threshold(100.0, 100), Err(Error::Infeasible(_))));
        assert!(matches!(solve_threshold(50.0, 100), Err(Error::Infeasible(_))));
    }

    #[test]
    fn solve_meets_residual() {
        let r = solve_threshold::<f64>(5038.0, 100).unwrap();
        assert!((r.achieved_arl / 5038.0 - 1.0).abs() <= ARL_RELATIVE_TOLERANCE);
        assert!((r.threshold - 3.58).abs() < 0.01);
        assert_eq!(r.regime_warning, 100.0 * (-0.5 * r.threshold * r.threshold).exp() > REGIME_WARNING_LEVEL);
        assert!(r.bracket.0 <= r.threshold && r.threshold <= r.bracket.1);
    }

    #[test]
    fn regime_warning_for_small_threshold() {
        let r = solve_threshold(150.0, 100).unwrap();
        assert!(r.regime_warning);
    }

    #[test]
    fn edd_bound_algebra() {
        let b = edd_upper_bound::<f64>(3.58, 100, 1, 2000.0, 40.0).unwrap();
        let b2 = edd_upper_bound::<f64>(3.58, 100, 1, 2000.0, 80.0).unwrap();
        assert!(((b.bound - 3.0) - 2.0 * (b2.bound - 3.0)).abs() < 1e-12);
        assert!(b.bound > 3.0);
        let inf = edd_upper_bound(3.58, 100, 0, 2000.0, 0.0).unwrap();
        assert!(!inf.is_finite());
        assert!(edd_upper_bound(-1.0, 100, 0, 2000.0, 1.0).is_err());
    }

    #[test]
    fn min_change_algebra() {
        assert_eq!(min_detectable_change(100.0, 100, 7.5), 7.5);
        let a: f64 = min_detectable_change(3.0, 100, 2.0);
        let b: f64 = min_detectable_change(3.0, 100, 6.0);
        assert!((b - 3.0 * a).abs() < 1e-15);
    }
}
