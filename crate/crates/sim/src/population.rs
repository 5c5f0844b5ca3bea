//! Exact second-order quantities of the generator, used as oracles and for
//! the theoretical delay bound.

use covshift::calibrate::root::bisect;
use covshift::dependence::null_variance;
use covshift::{edd_upper_bound, EddBound, Result, WeightPlan};

use crate::factor::{frobenius_sq, Factor};
use crate::generator::{lag_coefficients, GeneratorSpec};

/// `c(h) = sum_l g_l g_{l+|h|}`, so that `Cov(X_i, X_{i+h}) = c(h) F F^T`.
pub fn lag_weight(dep_order: usize, h: isize) -> f64 {
    let g = lag_coefficients(dep_order);
    let h = h.unsigned_abs();
    if h > dep_order {
        return 0.0;
    }
    (0..=dep_order - h).map(|l| g[l] * g[l + h]).sum()
}

/// Pre-change second-order structure of a spec.
#[derive(Debug, Clone)]
pub struct Population {
    pub dep_order: usize,
    pub p: usize,
    /// `||F F^T||_F^2` of the pre-change loading.
    pub base_cov_frob_sq: f64,
}

impl Population {
    pub fn of(spec: &GeneratorSpec) -> Self {
        let cov = spec.base.factor().covariance(spec.p);
        Self {
            dep_order: spec.dep_order,
            p: spec.p,
            base_cov_frob_sq: frobenius_sq(&cov),
        }
    }

    /// `tr{C(h1) C(h2)} = c(h1) c(h2) ||F F^T||_F^2`.
    pub fn trace_cross(&self, h1: isize, h2: isize) -> f64 {
        lag_weight(self.dep_order, h1) * lag_weight(self.dep_order, h2) * self.base_cov_frob_sq
    }

    /// Null standard deviation of the statistic over `window` observations
    /// using the true dependence order.
    pub fn null_sd(&self, window: usize) -> Result<f64> {
        let plan = WeightPlan::<f64>::new(window, self.dep_order)?;
        Ok(null_variance(&plan, |h1, h2| self.trace_cross(h1, h2)).sqrt())
    }

    /// `||Sigma_before||_F` of a single observation.
    pub fn marginal_cov_norm(&self) -> f64 {
        lag_weight(self.dep_order, 0) * self.base_cov_frob_sq.sqrt()
    }
}

/// `||Sigma_after - Sigma_before||_F` for one observation, where the
/// loadings are `q` after and the generator's base before.
pub fn change_norm(spec: &GeneratorSpec, q: &Factor) -> f64 {
    let p = spec.p;
    let before = spec.base.factor().covariance(p);
    let after = q.covariance(p);
    let d: f64 = before.iter().zip(&after).map(|(b, a)| (a - b) * (a - b)).sum();
    lag_weight(spec.dep_order, 0) * d.sqrt()
}

/// `||rho^{|i-j|} - I||_F^2 = 2 sum_{k=1}^{p-1} (p-k) rho^{2k}`.
pub fn bandable_change_sq(p: usize, rho: f64) -> f64 {
    let r2 = rho * rho;
    let mut pow = 1.0;
    let mut s = 0.0;
    for k in 1..p {
        pow *= r2;
        s += (p - k) as f64 * pow;
    }
    2.0 * s
}

/// Delay bound for an immediate change of `spec` to `q`, with the population
/// null standard deviation.
pub fn population_edd_bound(spec: &GeneratorSpec, q: &Factor, a: f64, window: usize) -> Result<EddBound<f64>> {
    let pop = Population::of(spec);
    let sd = pop.null_sd(window)?;
    edd_upper_bound(a, window, spec.dep_order, sd, change_norm(spec, q))
}

/// Smallest `rho` for which the bandable change from an identity base reaches
/// `sqrt(a/H) ||Sigma_before||_F`.
pub fn min_detectable_rho(p: usize, window: usize, a: f64) -> Result<f64> {
    // the lag weight c(0) multiplies both sides
    let target = covshift::min_detectable_change(a, window, (p as f64).sqrt());
    bisect(|r| bandable_change_sq(p, r).sqrt() - target, 0.0, 1.0 - 1e-12, 1e-12)
}
