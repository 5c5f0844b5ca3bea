//! Batch forms of the covariance-change statistic.

use crate::observations::{check_dim, dot};
use crate::sum::CompensatedSum;
use crate::weights::{masked_profile_matrix, split_coefficients, split_range, min_length};
use crate::{Error, Observations, Real, Result, WeightPlan};

/// Squared inner products `((x_i - mean)^T (x_j - mean))^2`, dense `n x n`.
pub fn squared_gram<T: Real>(x: &Observations<T>, mean: &[T]) -> Result<Vec<T>> {
    let c = x.centered(mean)?;
    Ok(squared_gram_centered(&c))
}

pub(crate) fn squared_gram_centered<T: Real>(c: &Observations<T>) -> Vec<T> {
    let n = c.len();
    let mut g = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let d = dot(c.row(i), c.row(j));
            let v = d * d;
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// `(1/n^2) sum_{i,j} W(i,j) ((x_i - mean)^T (x_j - mean))^2`.
///
/// Pass a zero mean for the uncentered form.
pub fn statistic_batch<T: Real>(x: &Observations<T>, mean: &[T], plan: &WeightPlan<T>) -> Result<T> {
    check_dim(x.dim(), mean.len(), "mean")?;
    if x.len() != plan.length() {
        return Err(Error::Input(format!(
            "{} observations but the weight plan has length {}",
            x.len(),
            plan.length()
        )));
    }
    let g = squared_gram(x, mean)?;
    Ok(weighted_sum(plan, |i, j| g[i * plan.length() + j]))
}

/// `(1/n^2) * sum_{i,j} W(i,j) g(i,j)` for a symmetric `g`, indexed 0-based.
///
/// Only the strict upper triangle is visited; the diagonal of `W` is zero.
#[inline]
pub(crate) fn weighted_sum<T: Real>(plan: &WeightPlan<T>, g: impl Fn(usize, usize) -> T) -> T {
    let n = plan.length();
    let m = plan.dep_order();
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        let row = plan.row(i);
        let mut row_acc = CompensatedSum::new();
        for (j, &w) in row.iter().enumerate().skip(i + m + 1) {
            row_acc.add(w * g(i, j));
        }
        acc.add(row_acc.value());
    }
    let n_t = T::of_usize(n);
    (acc.value() + acc.value()) / (n_t * n_t)
}

/// The profile statistic at split `t`: the batch statistic with `W` replaced
/// by the band-masked `A_t`.
pub fn profile_statistic<T: Real>(x: &Observations<T>, mean: &[T], dep_order: usize, t: usize) -> Result<T> {
    let n = x.len();
    let a: Vec<T> = masked_profile_matrix(t, n, dep_order)?;
    let g = squared_gram(x, mean)?;
    let mut acc = CompensatedSum::new();
    for (w, v) in a.iter().zip(&g) {
        acc.add(*w * *v);
    }
    let n_t = T::of_usize(n);
    Ok(acc.value() / (n_t * n_t))
}

/// Profile statistic at every admissible split, as `(t, value)` pairs.
///
/// Shares one squared Gram matrix across splits and updates the three block
/// sums incrementally, so the whole curve costs `O(n^2 p)`.
pub fn profile_curve<T: Real>(x: &Observations<T>, mean: &[T], dep_order: usize) -> Result<Vec<(usize, T)>> {
    let n = x.len();
    let range = split_range(n, dep_order).ok_or(Error::LengthTooSmall {
        length: n,
        dep_order,
        min_length: min_length(dep_order),
    })?;
    let g = squared_gram(x, mean)?;
    Ok(profile_curve_from_gram(&g, n, dep_order, range))
}

pub(crate) fn profile_curve_from_gram<T: Real>(
    g: &[T],
    n: usize,
    m: usize,
    range: core::ops::RangeInclusive<usize>,
) -> Vec<(usize, T)> {
    let masked = |i: usize, j: usize| -> f64 {
        if i.abs_diff(j) <= m {
            0.0
        } else {
            g[i * n + j].to_f64_lossy()
        }
    };
    // before[k]: sum of masked g(i, k) over i < k; after[k]: over j > k.
    let mut before = vec![0.0_f64; n];
    let mut after = vec![0.0_f64; n];
    for k in 0..n {
        let mut b = CompensatedSum::new();
        for i in 0..k {
            b.add(masked(i, k));
        }
        before[k] = b.value();
        let mut a = CompensatedSum::new();
        for j in (k + 1)..n {
            a.add(masked(k, j));
        }
        after[k] = a.value();
    }
    let total: f64 = 2.0 * before.iter().copied().collect::<CompensatedSum<f64>>().value();

    // Walk t = 1..n (1-based) maintaining left-left and one-sided cross sums.
    let mut left_left = 0.0_f64;
    let mut cross = 0.0_f64;
    let n_sq = (n * n) as f64;
    let mut out = Vec::with_capacity(range.clone().count());
    for t in 1..=n {
        let k = t - 1;
        left_left += 2.0 * before[k];
        cross += after[k] - before[k];
        if range.contains(&t) {
            let right_right = total - left_left - 2.0 * cross;
            let (l, r, c) = split_coefficients(t, n, m);
            let v = (l * left_left + r * right_right - 2.0 * c * cross) / n_sq;
            out.push((t, T::of(v)));
        }
    }
    out
}
