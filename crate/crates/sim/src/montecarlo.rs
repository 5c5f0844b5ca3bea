//! Replicated runs of the full pipeline: generate training, fit, monitor.

use std::sync::Arc;

use covshift::{fit_training, Detector, DetectorConfig, Error, Result, StepOutcome, TrainingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::factor::Factor;
use crate::generator::{GeneratorSpec, StreamGenerator};

/// Fraction of censored or undetected runs above which a result is flagged.
pub const UNRELIABLE_FRACTION: f64 = 0.05;

/// Offset mixed into the seed that draws a random post-change loading.
const LOADING_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DepOrderChoice {
    /// Use the generator's true order.
    #[default]
    True,
    Estimated { epsilon: f64, max_lag: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecipe {
    pub n0: usize,
    #[serde(default)]
    pub dep_order: DepOrderChoice,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    covshift::dependence::DEFAULT_ALPHA
}

impl SummaryRecipe {
    pub fn new(n0: usize) -> Self {
        Self {
            n0,
            dep_order: DepOrderChoice::True,
            alpha: default_alpha(),
        }
    }

    fn training_config(&self, spec: &GeneratorSpec, window: usize) -> TrainingConfig {
        let mut c = TrainingConfig::new(window);
        c.alpha = self.alpha;
        match self.dep_order {
            DepOrderChoice::True => c.m_override = Some(spec.dep_order),
            DepOrderChoice::Estimated { epsilon, max_lag } => {
                c.epsilon = epsilon;
                c.max_lag = max_lag;
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub spec: GeneratorSpec,
    pub recipe: SummaryRecipe,
    pub threshold: f64,
    pub window: usize,
    /// Post-training observations before a run is censored.
    pub max_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub replicates: usize,
    pub mean: f64,
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Runs without an alarm within `max_steps`.
    pub censored: usize,
    /// Runs dropped because the alarm preceded the change.
    pub discarded: usize,
    pub unreliable: bool,
}

impl McResult {
    pub fn from_values(values: Vec<f64>, keep: bool) -> Self {
        let n = values.len();
        let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
        let std_error = if n < 2 {
            f64::NAN
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Self {
            replicates: n,
            mean,
            std_error,
            values: keep.then_some(values),
            censored: 0,
            discarded: 0,
            unreliable: false,
        }
    }

    /// Records censoring out of `runs` total runs.
    pub fn with_counts(mut self, censored: usize, discarded: usize, runs: usize) -> Self {
        self.censored = censored;
        self.discarded = discarded;
        self.unreliable = runs > 0 && censored as f64 > UNRELIABLE_FRACTION * runs as f64;
        self
    }
}

/// What one replicate produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub stopping_time: Option<usize>,
    pub m_hat: usize,
    pub stationarity_rejected: bool,
    /// Absolute-time change estimate after an alarm.
    pub tau_hat: Option<usize>,
}

/// Random stream of replicate `index` under `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// The post-change loading used by every replicate of `seed`.
pub fn cell_loading(spec: &GeneratorSpec, seed: u64) -> Result<Option<Factor>> {
    spec.post_factor(seed ^ LOADING_SEED_OFFSET)
}

/// Training, fit and monitoring for one replicate.
pub fn run_replicate(cfg: &McConfig, q: Option<&Factor>, index: u64, localize: bool) -> Result<Replicate> {
    let mut gen = StreamGenerator::new(&cfg.spec, q, replicate_rng(cfg.seed, index))?;
    let train = gen.take(cfg.recipe.n0);
    let summary = fit_training(&train, &cfg.recipe.training_config(&cfg.spec, cfg.window))?;
    let m_hat = summary.m_hat;
    let rejected = summary.stationarity.rejected;
    let mut dc = DetectorConfig::new(cfg.window, cfg.threshold);
    dc.localize = localize;
    dc.history_limit = dc.history_limit.max(cfg.recipe.n0 + cfg.max_steps);
    let mut det = Detector::new(Arc::new(summary), &dc, Some(&train))?;
    let mut row = vec![0.0; cfg.spec.p];
    let mut stop = None;
    for _ in 0..cfg.max_steps {
        gen.next_into(&mut row);
        if let StepOutcome::Alarm { stopping_time, .. } = det.step(&row)? {
            stop = Some(stopping_time);
            break;
        }
    }
    let tau_hat = if localize && stop.is_some() { det.report()?.tau_hat } else { None };
    Ok(Replicate {
        stopping_time: stop,
        m_hat,
        stationarity_rejected: rejected,
        tau_hat,
    })
}

/// All replicates in parallel, in index order.
pub fn run_replicates(cfg: &McConfig, replicates: usize, localize: bool) -> Result<Vec<Replicate>> {
    let q = cell_loading(&cfg.spec, cfg.seed)?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| run_replicate(cfg, q.as_ref(), i, localize))
        .collect()
}

/// Mean run length without a change. Censored runs count as `max_steps`.
pub fn monte_carlo_arl(cfg: &McConfig, replicates: usize, keep_values: bool) -> Result<McResult> {
    if cfg.spec.post_change.is_some() {
        return Err(Error::Config("run-length study needs a spec without a change".into()));
    }
    let runs = run_replicates(cfg, replicates, false)?;
    let censored = runs.iter().filter(|r| r.stopping_time.is_none()).count();
    let values = runs
        .iter()
        .map(|r| r.stopping_time.unwrap_or(cfg.max_steps) as f64)
        .collect();
    let res = McResult::from_values(values, keep_values).with_counts(censored, 0, replicates);
    if res.unreliable {
        log::warn!("{censored} of {replicates} runs censored at {} steps", cfg.max_steps);
    }
    Ok(res)
}

/// Delays and change estimates of a study with a planted change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EddStudy {
    pub delays: McResult,
    /// `|tau_hat - tau|` for each detected run that could be localized.
    pub localization_errors: Vec<usize>,
}

/// Detection delay `T - (tau - n0)` over replicates. Runs that alarm at or
/// before the change are discarded; undetected runs are counted as censored.
pub fn monte_carlo_edd(cfg: &McConfig, replicates: usize, keep_values: bool) -> Result<EddStudy> {
    let pc = cfg
        .spec
        .post_change
        .ok_or_else(|| Error::Config("delay study needs a post-change model".into()))?;
    if pc.change_at < cfg.recipe.n0 {
        return Err(Error::Config(format!(
            "change at {} falls inside the training sample of {}",
            pc.change_at, cfg.recipe.n0
        )));
    }
    let offset = pc.change_at - cfg.recipe.n0;
    let runs = run_replicates(cfg, replicates, true)?;
    let mut values = Vec::with_capacity(runs.len());
    let mut errors = Vec::new();
    let (mut censored, mut discarded) = (0, 0);
    for r in &runs {
        match r.stopping_time {
            None => censored += 1,
            Some(t) if t <= offset => discarded += 1,
            Some(t) => {
                values.push((t - offset) as f64);
                if let Some(tau) = r.tau_hat {
                    errors.push(tau.abs_diff(pc.change_at));
                }
            }
        }
    }
    let delays = McResult::from_values(values, keep_values).with_counts(censored, discarded, replicates);
    if delays.unreliable {
        log::warn!("{censored} of {replicates} runs found no change within {} steps", cfg.max_steps);
    }
    Ok(EddStudy {
        delays,
        localization_errors: errors,
    })
}

/// Histogram of the selected dependence order on training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    /// `counts[m]` replicates selected order `m`.
    pub counts: Vec<usize>,
    /// Replicates where no lag up to `max_lag` met the cutoff.
    pub too_strong: usize,
}

impl OrderSelection {
    pub fn correct(&self, m: usize) -> usize {
        self.counts.get(m).copied().unwrap_or(0)
    }
}

pub fn m_selection_study(
    spec: &GeneratorSpec,
    n0: usize,
    epsilon: f64,
    max_lag: usize,
    replicates: usize,
    seed: u64,
) -> Result<OrderSelection> {
    let q = cell_loading(spec, seed)?;
    let picks: Vec<Option<usize>> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut gen = StreamGenerator::new(spec, q.as_ref(), replicate_rng(seed, i))?;
            let train = gen.take(n0);
            match covshift::estimate_dep_order(&train, &train.mean(), epsilon, max_lag) {
                Ok(m) => Ok(Some(m)),
                Err(Error::DependenceTooStrong { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0; max_lag + 1];
    let mut too_strong = 0;
    for p in picks {
        match p {
            Some(m) => counts[m] += 1,
            None => too_strong += 1,
        }
    }
    Ok(OrderSelection { counts, too_strong })
}

/// Fraction of training samples the stationarity test rejects. A change
/// inside the sample (`change_at < n0`) gives power instead of size.
pub fn stationarity_rejection_rate(spec: &GeneratorSpec, recipe: &SummaryRecipe, replicates: usize, seed: u64) -> Result<f64> {
    let q = cell_loading(spec, seed)?;
    let rejected: usize = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut gen = StreamGenerator::new(spec, q.as_ref(), replicate_rng(seed, i))?;
            let train = gen.take(recipe.n0);
            let mean = train.mean();
            let m = match recipe.dep_order {
                DepOrderChoice::True => spec.dep_order,
                DepOrderChoice::Estimated { epsilon, max_lag } => {
                    covshift::estimate_dep_order(&train, &mean, epsilon, max_lag)?
                }
            };
            let s = covshift::stationarity_test(&train, &mean, m, recipe.alpha)?;
            Ok(s.rejected as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(rejected as f64 / replicates as f64)
}
