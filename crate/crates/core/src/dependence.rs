//! Nuisance-parameter estimation from a training sample: cross-covariance
//! trace products, the dependence order, the null standard deviation of the
//! windowed statistic, and the training-sample stationarity test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::observations::{check_dim, dot};
use crate::statistic::statistic_batch;
use crate::weights::min_length;
use crate::{Error, Observations, Real, Result, WeightPlan};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_MAX_LAG: usize = 10;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Estimates of `tr{C(h1) C(h2)}` for `h1, h2` in `-M..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceTable<T> {
    pub dep_order: usize,
    /// Row `h1 + M`, column `h2 + M`.
    pub entries: Vec<Vec<T>>,
}

impl<T: Real> TraceTable<T> {
    pub fn entry(&self, h1: isize, h2: isize) -> T {
        let m = self.dep_order as isize;
        assert!(h1.abs() <= m && h2.abs() <= m, "lag outside table");
        self.entries[(h1 + m) as usize][(h2 + m) as usize]
    }
}

/// Outcome of the one-sided stationarity test on the training sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Stationarity<T> {
    pub statistic: T,
    pub z_alpha: T,
    pub rejected: bool,
}

/// Everything fitted from the training sample that monitoring needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrainingSummary<T> {
    pub n0: usize,
    pub p: usize,
    pub mean: Vec<T>,
    pub m_hat: usize,
    pub trace_table: TraceTable<T>,
    /// Window length `null_sd` was computed for.
    pub window: usize,
    pub null_sd: T,
    pub stationarity: Stationarity<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub window: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_lag: usize,
    pub m_override: Option<usize>,
}

impl TrainingConfig {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            alpha: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
            max_lag: DEFAULT_MAX_LAG,
            m_override: None,
        }
    }
}

/// Inner products of the centered training sample, shared by every trace
/// estimate.
#[derive(Debug, Clone)]
pub struct TrainingGram {
    n: usize,
    gram: Vec<f64>,
}

impl TrainingGram {
    pub fn new<T: Real>(train: &Observations<T>, mean: &[T]) -> Result<Self> {
        let c = train.centered(mean)?;
        let n = c.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let d = dot(c.row(i), c.row(j)).to_f64_lossy();
                gram[i * n + j] = d;
                gram[j * n + i] = d;
            }
        }
        Ok(Self { n, gram })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    /// Raw (unsymmetrized) estimate of `tr{C(h1) C(h2)}`: the mean of
    /// `x_{t+h2}^T x_s * x_{s+h1}^T x_t` over ordered pairs `(s, t)` whose
    /// index groups `{s, s+h1}` and `{t, t+h2}` are more than `separation`
    /// apart and lie inside the sample.
    pub fn trace_cross(&self, h1: isize, h2: isize, separation: usize) -> Result<f64> {
        let n = self.n as isize;
        let sep = separation as isize;
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in 0..n {
            let s2 = s + h1;
            if s2 < 0 || s2 >= n {
                continue;
            }
            let (s_lo, s_hi) = (s.min(s2), s.max(s2));
            for t in 0..n {
                let t2 = t + h2;
                if t2 < 0 || t2 >= n {
                    continue;
                }
                let (t_lo, t_hi) = (t.min(t2), t.max(t2));
                // Gap between the two index intervals.
                let gap = if s_hi < t_lo {
                    t_lo - s_hi
                } else if t_hi < s_lo {
                    s_lo - t_hi
                } else {
                    0
                };
                if gap <= sep {
                    continue;
                }
                sum += self.at(t2 as usize, s as usize) * self.at(s2 as usize, t as usize);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::InsufficientTraining {
                have: self.n,
                need: h1.unsigned_abs() + h2.unsigned_abs() + separation + 2,
            });
        }
        Ok(sum / count as f64)
    }

    /// Symmetrized table for dependence order `dep_order`.
    pub fn trace_table<T: Real>(&self, dep_order: usize) -> Result<TraceTable<T>> {
        let m = dep_order as isize;
        let size = 2 * dep_order + 1;
        let mut raw = vec![vec![0.0; size]; size];
        for h1 in -m..=m {
            for h2 in -m..=m {
                raw[(h1 + m) as usize][(h2 + m) as usize] = self.trace_cross(h1, h2, dep_order)?;
            }
        }
        let entries = (0..size)
            .map(|a| (0..size).map(|b| T::of(0.5 * (raw[a][b] + raw[b][a]))).collect())
            .collect();
        Ok(TraceTable { dep_order, entries })
    }

    /// `tr^{C(h) C(-h)} / tr^{C(0) C(0)}`. Each lag-`h` estimate excludes
    /// index groups closer than `h + 1`.
    pub fn lag_ratio(&self, h: usize) -> Result<f64> {
        let denom = self.trace_cross(0, 0, 0)?;
        if denom <= 0.0 {
            return Err(Error::Degenerate(
                "training sample has zero lag-0 trace estimate".into(),
            ));
        }
        if h == 0 {
            return Ok(1.0);
        }
        let num = self.trace_cross(h as isize, -(h as isize), h)?;
        Ok(num / denom)
    }

    /// First `h*` with ratio at or below `epsilon`, returned as `h* - 1`.
    pub fn select_dep_order(&self, epsilon: f64, max_lag: usize) -> Result<usize> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {epsilon} not in (0, 1)")));
        }
        for h in 1..=max_lag + 1 {
            if self.lag_ratio(h)? <= epsilon {
                return Ok(h - 1);
            }
        }
        Err(Error::DependenceTooStrong { max_lag, epsilon })
    }
}

/// Estimate of `tr{C(h1) C(h2)}` from a training sample, with index groups
/// separated by more than `dep_order`.
pub fn estimate_trace_cross<T: Real>(
    train: &Observations<T>,
    mean: &[T],
    h1: isize,
    h2: isize,
    dep_order: usize,
) -> Result<T> {
    let gram = TrainingGram::new(train, mean)?;
    gram.trace_cross(h1, h2, dep_order).map(T::of)
}

/// Data-driven dependence order.
pub fn estimate_dep_order<T: Real>(
    train: &Observations<T>,
    mean: &[T],
    epsilon: f64,
    max_lag: usize,
) -> Result<usize> {
    TrainingGram::new(train, mean)?.select_dep_order(epsilon, max_lag)
}

/// Leading-order null variance `(4/H^4) sum_{h1,h2} O(h1,h2) tr(h1,h2)^2`,
/// where `O` is the lagged self-overlap of the weights.
pub fn null_variance(plan: &WeightPlan<impl Real>, trace: impl Fn(isize, isize) -> f64) -> f64 {
    let m = plan.dep_order() as isize;
    let h = plan.length() as f64;
    let mut acc = 0.0;
    for h1 in -m..=m {
        for h2 in -m..=m {
            let tr = trace(h1, h2);
            if tr == 0.0 {
                continue;
            }
            acc += plan.lagged_overlap(h1, h2) * tr * tr;
        }
    }
    4.0 * acc / (h * h * h * h)
}

/// Plug-in null standard deviation of the statistic over `plan.length()`
/// observations. Falls back to the lag-(0, 0) term when the full sum is not
/// positive.
pub fn null_sd_from_table<T: Real>(table: &TraceTable<T>, plan: &WeightPlan<T>) -> Result<T> {
    if table.dep_order != plan.dep_order() {
        return Err(Error::Config(format!(
            "trace table order {} does not match plan order {}",
            table.dep_order,
            plan.dep_order()
        )));
    }
    let var = null_variance(plan, |h1, h2| table.entry(h1, h2).to_f64_lossy());
    if var > 0.0 && var.is_finite() {
        return Ok(T::of(var.sqrt()));
    }
    let tr0 = table.entry(0, 0).to_f64_lossy();
    let h = plan.length() as f64;
    let fallback = 4.0 * plan.sum_of_squares() * tr0 * tr0 / (h * h * h * h);
    if fallback > 0.0 && fallback.is_finite() {
        log::warn!("null variance estimate {var:e} not positive; using the lag-0 term only");
        return Ok(T::of(fallback.sqrt()));
    }
    Err(Error::Degenerate(format!(
        "null variance estimate is {var:e}; training sample carries no second-order signal"
    )))
}

pub fn estimate_null_sd<T: Real>(
    train: &Observations<T>,
    mean: &[T],
    dep_order: usize,
    window: usize,
) -> Result<T> {
    let plan = WeightPlan::new(window, dep_order)?;
    let table = TrainingGram::new(train, mean)?.trace_table(dep_order)?;
    null_sd_from_table(&table, &plan)
}

/// Upper `alpha` quantile of the standard normal.
pub fn upper_normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} not in (0, 1)")));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - alpha))
}

fn stationarity_with_gram<T: Real>(
    train: &Observations<T>,
    mean: &[T],
    gram: &TrainingGram,
    dep_order: usize,
    alpha: f64,
) -> Result<Stationarity<T>> {
    let z = upper_normal_quantile(alpha)?;
    let plan = WeightPlan::new(train.len(), dep_order)?;
    let table = gram.trace_table::<T>(dep_order)?;
    let sd = null_sd_from_table(&table, &plan)?;
    let stat = statistic_batch(train, mean, &plan)? / sd;
    let z_alpha = T::of(z);
    Ok(Stationarity {
        statistic: stat,
        z_alpha,
        rejected: stat > z_alpha,
    })
}

/// One-sided test of covariance stationarity over the whole training sample.
pub fn stationarity_test<T: Real>(
    train: &Observations<T>,
    mean: &[T],
    dep_order: usize,
    alpha: f64,
) -> Result<Stationarity<T>> {
    check_dim(train.dim(), mean.len(), "mean")?;
    let gram = TrainingGram::new(train, mean)?;
    stationarity_with_gram(train, mean, &gram, dep_order, alpha)
}

/// Fits mean, dependence order, trace table, null standard deviation for
/// `config.window`, and the stationarity verdict. A rejected stationarity
/// test is reported in the summary, not raised.
pub fn fit_training<T: Real>(train: &Observations<T>, config: &TrainingConfig) -> Result<TrainingSummary<T>> {
    let n0 = train.len();
    if n0 == 0 {
        return Err(Error::InsufficientTraining { have: 0, need: min_length(0) });
    }
    let mean = train.mean();
    let gram = TrainingGram::new(train, &mean)?;
    let m_hat = match config.m_override {
        Some(m) => m,
        None => gram.select_dep_order(config.epsilon, config.max_lag)?,
    };
    if n0 < min_length(m_hat) {
        return Err(Error::InsufficientTraining {
            have: n0,
            need: min_length(m_hat),
        });
    }
    let plan = WeightPlan::new(config.window, m_hat)?;
    let trace_table = gram.trace_table::<T>(m_hat)?;
    let null_sd = null_sd_from_table(&trace_table, &plan)?;
    let stationarity = stationarity_with_gram(train, &mean, &gram, m_hat, config.alpha)?;
    Ok(TrainingSummary {
        n0,
        p: train.dim(),
        mean,
        m_hat,
        trace_table,
        window: config.window,
        null_sd,
        stationarity,
    })
}
