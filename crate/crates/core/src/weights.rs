//! Split-point weights and their accumulation over all admissible splits.
//!
//! Positions are 1-based throughout this module, matching the convention
//! that a sequence of length `n` is indexed `1..=n`. For a split point `t`
//! the profile weight `A_t(i, j)` contrasts the covariance structure of the
//! segment `1..=t` with that of `t+1..=n`; the plan weight `W(i, j)` sums the
//! profile weights over every split `t` in `M+2..=n-M-2` and zeroes pairs
//! closer than `M+1` apart.

use crate::{Error, Real, Result};

/// Smallest sequence length for which dependence order `dep_order` leaves at
/// least one admissible split point.
pub const fn min_length(dep_order: usize) -> usize {
    2 * dep_order + 5
}

/// Admissible split points `M+2..=n-M-2` for a sequence of length `n`.
pub fn split_range(n: usize, dep_order: usize) -> Option<core::ops::RangeInclusive<usize>> {
    if n < min_length(dep_order) {
        return None;
    }
    Some(dep_order + 2..=n - dep_order - 2)
}

/// The three coefficients of `A_t` at split `t`: (left-left, right-right, cross).
///
/// The cross coefficient is returned as a positive magnitude; it enters the
/// profile weight with a negative sign.
#[inline]
pub(crate) fn split_coefficients(t: usize, n: usize, m: usize) -> (f64, f64, f64) {
    let (t, n, m) = (t as f64, n as f64, m as f64);
    let left = (n - t - m) / (t - m - 1.0);
    let right = (t - m) / (n - t - m - 1.0);
    let cross = (t - m) * (n - t - m) / (t * (n - t) - 0.5 * m * (m + 1.0));
    (left, right, cross)
}

/// `A_{t,M}(i, j)` for a sequence of length `n`, without the band indicator.
pub fn profile_weight<T: Real>(t: usize, i: usize, j: usize, n: usize, dep_order: usize) -> Result<T> {
    let range = split_range(n, dep_order).ok_or(Error::LengthTooSmall {
        length: n,
        dep_order,
        min_length: min_length(dep_order),
    })?;
    if !range.contains(&t) {
        return Err(Error::Precondition(format!(
            "split point {t} outside {}..={}",
            range.start(),
            range.end()
        )));
    }
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::Precondition(format!(
            "positions ({i}, {j}) outside 1..={n}"
        )));
    }
    let (left, right, cross) = split_coefficients(t, n, dep_order);
    let w = match (i <= t, j <= t) {
        (true, true) => left,
        (false, false) => right,
        _ => -cross,
    };
    Ok(T::of(w))
}

/// Dense symmetric weight matrix `W_M` for one length and dependence order.
///
/// Immutable after construction. A plan built for the window length `H` is
/// reused for every window evaluation since the weights depend only on
/// relative positions.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPlan<T> {
    length: usize,
    dep_order: usize,
    weights: Vec<T>,
}

impl<T: Real> WeightPlan<T> {
    /// Builds `W_M` in `O(length^2)` using prefix sums over split points.
    ///
    /// The accumulation runs in `f64` regardless of `T`.
    pub fn new(length: usize, dep_order: usize) -> Result<Self> {
        let range = split_range(length, dep_order).ok_or(Error::LengthTooSmall {
            length,
            dep_order,
            min_length: min_length(dep_order),
        })?;
        let n = length;
        let (lo, hi) = (*range.start(), *range.end());

        // prefix[k] = sum over admissible t <= k, for k in 0..=n.
        let mut left = vec![0.0_f64; n + 1];
        let mut right = vec![0.0_f64; n + 1];
        let mut cross = vec![0.0_f64; n + 1];
        for k in 1..=n {
            let (l, r, c) = if (lo..=hi).contains(&k) {
                split_coefficients(k, n, dep_order)
            } else {
                (0.0, 0.0, 0.0)
            };
            left[k] = left[k - 1] + l;
            right[k] = right[k - 1] + r;
            cross[k] = cross[k - 1] + c;
        }

        let mut weights = vec![T::zero(); n * n];
        for i in 1..=n {
            for j in (i + dep_order + 1)..=n {
                // t >= j: both on the left.
                let ll = left[n] - left[j - 1];
                // t <= i-1: both on the right.
                let rr = right[i - 1];
                // i <= t <= j-1: split.
                let lr = cross[j - 1] - cross[i - 1];
                let w = T::of(ll + rr - lr);
                weights[(i - 1) * n + (j - 1)] = w;
                weights[(j - 1) * n + (i - 1)] = w;
            }
        }
        Ok(Self {
            length,
            dep_order,
            weights,
        })
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.length
    }

    #[inline]
    pub fn dep_order(&self) -> usize {
        self.dep_order
    }

    /// `W(i, j)` for 1-based positions.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[(i - 1) * self.length + (j - 1)]
    }

    /// `W(i, j)` extended by zero outside `1..=length`, for signed positions.
    #[inline]
    pub fn weight_or_zero(&self, i: isize, j: isize) -> T {
        let n = self.length as isize;
        if i < 1 || j < 1 || i > n || j > n {
            T::zero()
        } else {
            self.weights[(i - 1) as usize * self.length + (j - 1) as usize]
        }
    }

    /// Row `i` (0-based) of the dense matrix.
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.weights[i * self.length..(i + 1) * self.length]
    }

    pub fn as_dense(&self) -> &[T] {
        &self.weights
    }

    /// `sum_{i,j} W(i, j) * W(i - h1, j + h2)` with zero extension.
    pub fn lagged_overlap(&self, h1: isize, h2: isize) -> f64 {
        lagged_overlap(&self.weights, self.length, h1, h2)
    }

    /// `sum_{i,j} W(i, j)^2`.
    pub fn sum_of_squares(&self) -> f64 {
        self.lagged_overlap(0, 0)
    }

    /// The band-masked profile matrix `A_t(i, j) * I(|i - j| >= M + 1)`,
    /// dense and row-major.
    pub fn profile_matrix(&self, t: usize) -> Result<Vec<T>> {
        masked_profile_matrix(t, self.length, self.dep_order)
    }
}

/// `sum_{i,j} A(i, j) * A(i - h1, j + h2)` for a dense row-major `n x n`
/// matrix, with zero extension outside `1..=n`.
pub(crate) fn lagged_overlap<T: Real>(a: &[T], n: usize, h1: isize, h2: isize) -> f64 {
    let ni = n as isize;
    let mut acc = crate::sum::CompensatedSum::<f64>::new();
    for i in 0..ni {
        let ii = i - h1;
        if ii < 0 || ii >= ni {
            continue;
        }
        let j_lo = 0.max(-h2);
        let j_hi = ni.min(ni - h2);
        let row = &a[(i * ni) as usize..((i + 1) * ni) as usize];
        let shifted = &a[(ii * ni) as usize..((ii + 1) * ni) as usize];
        let mut row_acc = 0.0;
        for j in j_lo..j_hi {
            row_acc += row[j as usize].to_f64_lossy() * shifted[(j + h2) as usize].to_f64_lossy();
        }
        acc.add(row_acc);
    }
    acc.value()
}

pub(crate) fn masked_profile_matrix<T: Real>(t: usize, n: usize, m: usize) -> Result<Vec<T>> {
    // validates t
    profile_weight::<T>(t, 1, 1, n, m)?;
    let (left, right, cross) = split_coefficients(t, n, m);
    let mut a = vec![T::zero(); n * n];
    for i in 1..=n {
        for j in 1..=n {
            if i.abs_diff(j) <= m {
                continue;
            }
            let w = match (i <= t, j <= t) {
                (true, true) => left,
                (false, false) => right,
                _ => -cross,
            };
            a[(i - 1) * n + (j - 1)] = T::of(w);
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal triple loop over t, i, j.
    fn brute_force(n: usize, m: usize) -> Vec<f64> {
        let mut w = vec![0.0; n * n];
        for t in (m + 2)..=(n - m - 2) {
            for i in 1..=n {
                for j in 1..=n {
                    if i.abs_diff(j) > m {
                        w[(i - 1) * n + (j - 1)] += profile_weight::<f64>(t, i, j, n, m).unwrap();
                    }
                }
            }
        }
        w
    }

    #[test]
    fn profile_weight_branches() {
        let v: f64 = profile_weight(4, 1, 2, 8, 0).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
        let v: f64 = profile_weight(4, 2, 6, 8, 0).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
        let v: f64 = profile_weight(4, 6, 7, 8, 0).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn profile_weight_rejects_out_of_range() {
        assert!(matches!(
            profile_weight::<f64>(1, 1, 2, 8, 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            profile_weight::<f64>(7, 1, 2, 8, 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            profile_weight::<f64>(4, 0, 2, 8, 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            profile_weight::<f64>(4, 1, 9, 8, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn plan_matches_triple_loop_at_length_nine() {
        for m in 0..=2 {
            let plan = WeightPlan::<f64>::new(9, m).unwrap();
            let oracle = brute_force(9, m);
            for (k, (&a, &b)) in plan.as_dense().iter().zip(&oracle).enumerate() {
                assert!((a - b).abs() < 1e-12, "M={m} entry {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn plan_entries_at_length_nine_m0() {
        // Frozen from the triple-loop oracle.
        let plan = WeightPlan::<f64>::new(9, 0).unwrap();
        let oracle = brute_force(9, 0);
        assert!((plan.weight(1, 2) - oracle[1]).abs() < 1e-14);
        assert!((plan.weight(1, 9) - oracle[8]).abs() < 1e-14);
        assert!((plan.weight(4, 5) - oracle[3 * 9 + 4]).abs() < 1e-14);
        assert_eq!(plan.weight(3, 3), 0.0);
    }

    #[test]
    fn too_short_length_names_minimum() {
        let err = WeightPlan::<f64>::new(8, 2).unwrap_err();
        assert_eq!(
            err,
            Error::LengthTooSmall {
                length: 8,
                dep_order: 2,
                min_length: 9
            }
        );
        assert!(err.to_string().contains("at least 9"));
    }

    #[test]
    fn lagged_overlap_at_zero_is_sum_of_squares() {
        let plan = WeightPlan::<f64>::new(20, 1).unwrap();
        let direct: f64 = plan.as_dense().iter().map(|w| w * w).sum();
        assert!((plan.sum_of_squares() - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn lagged_overlap_matches_signed_index_loop() {
        let plan = WeightPlan::<f64>::new(15, 2).unwrap();
        let n = 15isize;
        for h1 in -2..=2isize {
            for h2 in -2..=2isize {
                let mut s = 0.0;
                for i in 1..=n {
                    for j in 1..=n {
                        s += plan.weight_or_zero(i, j) * plan.weight_or_zero(i - h1, j + h2);
                    }
                }
                let v = plan.lagged_overlap(h1, h2);
                assert!((v - s).abs() < 1e-10 * (1.0 + s.abs()), "({h1},{h2}) {v} vs {s}");
            }
        }
    }

    #[test]
    fn profile_matrix_is_masked() {
        let plan = WeightPlan::<f64>::new(12, 1).unwrap();
        let a = plan.profile_matrix(5).unwrap();
        assert_eq!(a[0], 0.0);
        assert_eq!(a[1], 0.0);
        assert!(a[2] != 0.0);
        assert!(plan.profile_matrix(2).is_err());
    }

    proptest! {
        #[test]
        fn plan_invariants(m in 0usize..5, extra in 0usize..60) {
            let n = min_length(m) + extra;
            let plan = WeightPlan::<f64>::new(n, m).unwrap();
            let mut total = 0.0;
            let mut total_abs = 0.0;
            for i in 1..=n {
                for j in 1..=n {
                    let w = plan.weight(i, j);
                    prop_assert_eq!(w, plan.weight(j, i));
                    if i.abs_diff(j) <= m {
                        prop_assert_eq!(w, 0.0);
                    }
                    total += w;
                    total_abs += w.abs();
                }
            }
            prop_assert!(total.abs() <= 1e-8 * total_abs, "sum {} vs abs {}", total, total_abs);
        }
    }
}
