//! The windowed stopping rule as a streaming state machine, and post-alarm
//! change-point localization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dependence::TrainingSummary;
use crate::statistic::{profile_curve_from_gram, squared_gram};
use crate::weights::{lagged_overlap, masked_profile_matrix, min_length, split_range};
use crate::{Error, Observations, Real, Result, WeightPlan, WindowState};

/// Observations retained for localization unless configured otherwise.
pub const DEFAULT_HISTORY_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DetectorConfig<T> {
    pub window: usize,
    pub threshold: T,
    /// Must equal the summary's fitted order when set.
    pub dep_order: Option<usize>,
    /// First post-training index (1-based) at which the rule is checked.
    pub evaluate_from: usize,
    /// Keep observations for localizing the change after an alarm.
    pub localize: bool,
    /// Most recent observations kept for localization.
    pub history_limit: usize,
}

impl<T: Real> DetectorConfig<T> {
    pub fn new(window: usize, threshold: T) -> Self {
        Self {
            window,
            threshold,
            dep_order: None,
            evaluate_from: 1,
            localize: true,
            history_limit: DEFAULT_HISTORY_LIMIT,
        }
    }
}

/// Result of one detector step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
#[serde(bound = "T: Real")]
pub enum StepOutcome<T> {
    /// Window not yet full, or before `evaluate_from`.
    Filling,
    Monitoring { std_stat: T },
    Alarm { stopping_time: usize, std_stat: T },
}

/// Argmax of the profile statistic over a pulled-out sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Localization<T> {
    /// 1-based position within the sequence that was profiled.
    pub position: usize,
    pub peak: T,
    /// Peak divided by its plug-in null standard deviation.
    pub peak_z: T,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DetectionReport<T> {
    /// Post-training observations consumed when the alarm fired.
    pub stopping_time: Option<usize>,
    pub alarm_statistic: Option<T>,
    /// Post-training index of `trajectory[0]`.
    pub first_evaluation: Option<usize>,
    pub trajectory: Vec<T>,
    /// Estimated change point on the absolute time axis (training occupies
    /// `1..=n0`): the last observation before the change.
    pub tau_hat: Option<usize>,
    /// `n0 + stopping_time - tau_hat`.
    pub delay_vs_tau_hat: Option<usize>,
    pub localization: Option<Localization<T>>,
}

/// Streaming detector for one stream. Single writer.
#[derive(Debug, Clone)]
pub struct Detector<T> {
    plan: Arc<WeightPlan<T>>,
    window: WindowState<T>,
    summary: Arc<TrainingSummary<T>>,
    threshold: T,
    evaluate_from: usize,
    consumed: usize,
    trajectory: Vec<T>,
    first_evaluation: Option<usize>,
    alarm: Option<(usize, T)>,
    history: Option<History<T>>,
}

/// Bounded raw history; `start` is the absolute time of its first row.
#[derive(Debug, Clone)]
struct History<T> {
    limit: usize,
    start: usize,
    rows: std::collections::VecDeque<Vec<T>>,
}

impl<T: Real> History<T> {
    fn push(&mut self, x: &[T]) {
        if self.rows.len() == self.limit {
            self.rows.pop_front();
            self.start += 1;
        }
        self.rows.push_back(x.to_vec());
    }
}

impl<T: Real> Detector<T> {
    /// Primes the window with the last `H - 1` rows of `training` when given,
    /// so the first post-training observation is evaluated. Without training
    /// rows (or with fewer than `H - 1`) evaluation waits until the window
    /// holds `H` observations.
    pub fn new(
        summary: Arc<TrainingSummary<T>>,
        config: &DetectorConfig<T>,
        training: Option<&Observations<T>>,
    ) -> Result<Self> {
        let plan = Arc::new(WeightPlan::new(config.window, summary.m_hat)?);
        Self::with_plan(summary, config, training, plan)
    }

    /// As [`Detector::new`] with a shared, prebuilt weight plan.
    pub fn with_plan(
        summary: Arc<TrainingSummary<T>>,
        config: &DetectorConfig<T>,
        training: Option<&Observations<T>>,
        plan: Arc<WeightPlan<T>>,
    ) -> Result<Self> {
        if config.window != summary.window {
            return Err(Error::Config(format!(
                "detector window {} but the summary's null sd was fitted for window {}",
                config.window, summary.window
            )));
        }
        if let Some(m) = config.dep_order {
            if m != summary.m_hat {
                return Err(Error::Config(format!(
                    "dependence order {m} differs from the fitted order {}; refit the training sample",
                    summary.m_hat
                )));
            }
        }
        if plan.length() != config.window || plan.dep_order() != summary.m_hat {
            return Err(Error::Config("weight plan does not match window and order".into()));
        }
        if config.window < min_length(summary.m_hat) {
            return Err(Error::LengthTooSmall {
                length: config.window,
                dep_order: summary.m_hat,
                min_length: min_length(summary.m_hat),
            });
        }
        if !(config.threshold > T::zero()) {
            return Err(Error::Config(format!("threshold {} must be positive", config.threshold)));
        }
        if !(summary.null_sd > T::zero()) {
            return Err(Error::Degenerate("summary null sd is not positive".into()));
        }
        if config.localize && config.history_limit < min_length(summary.m_hat) {
            return Err(Error::Config(format!(
                "history limit {} cannot host a localization profile",
                config.history_limit
            )));
        }
        let mut window = WindowState::new(config.window, summary.mean.clone())?;
        let mut history = config.localize.then(|| History {
            limit: config.history_limit,
            start: summary.n0 + 1,
            rows: Default::default(),
        });
        if let Some(train) = training {
            if train.dim() != summary.p {
                return Err(Error::Input(format!(
                    "training rows have dimension {}, summary has {}",
                    train.dim(),
                    summary.p
                )));
            }
            let n = train.len();
            for row in train.rows().skip(n.saturating_sub(config.window - 1)) {
                window.push(row)?;
            }
            if let Some(h) = history.as_mut() {
                // Absolute time of the first supplied training row.
                h.start = summary.n0 + 1 - n.min(summary.n0);
                for row in train.rows().skip(n.saturating_sub(summary.n0)) {
                    h.push(row);
                }
            }
        }
        Ok(Self {
            plan,
            window,
            threshold: config.threshold,
            evaluate_from: config.evaluate_from.max(1),
            summary,
            consumed: 0,
            trajectory: Vec::new(),
            first_evaluation: None,
            alarm: None,
            history,
        })
    }

    pub fn step(&mut self, x: &[T]) -> Result<StepOutcome<T>> {
        if let Some((stopping_time, _)) = self.alarm {
            return Err(Error::AlreadyAlarmed { stopping_time });
        }
        self.window.push(x)?;
        self.consumed += 1;
        if let Some(h) = self.history.as_mut() {
            h.push(x);
        }
        if self.consumed < self.evaluate_from {
            return Ok(StepOutcome::Filling);
        }
        let Some(stat) = self.window.statistic(&self.plan)? else {
            return Ok(StepOutcome::Filling);
        };
        let std_stat = stat / self.summary.null_sd;
        if self.first_evaluation.is_none() {
            self.first_evaluation = Some(self.consumed);
        }
        self.trajectory.push(std_stat);
        if std_stat.abs() > self.threshold {
            self.alarm = Some((self.consumed, std_stat));
            return Ok(StepOutcome::Alarm {
                stopping_time: self.consumed,
                std_stat,
            });
        }
        Ok(StepOutcome::Monitoring { std_stat })
    }

    /// Post-training observations consumed so far.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn alarm(&self) -> Option<(usize, T)> {
        self.alarm
    }

    pub fn trajectory(&self) -> &[T] {
        &self.trajectory
    }

    pub fn summary(&self) -> &TrainingSummary<T> {
        &self.summary
    }

    /// Report for the run so far. Localizes the change when an alarm fired
    /// and history was kept.
    pub fn report(&self) -> Result<DetectionReport<T>> {
        let mut report = DetectionReport {
            stopping_time: self.alarm.map(|a| a.0),
            alarm_statistic: self.alarm.map(|a| a.1),
            first_evaluation: self.first_evaluation,
            trajectory: self.trajectory.clone(),
            tau_hat: None,
            delay_vs_tau_hat: None,
            localization: None,
        };
        if let (Some((stop, _)), Some(h)) = (self.alarm, self.history.as_ref()) {
            let mut obs = Observations::with_capacity(self.summary.p, h.rows.len());
            for r in &h.rows {
                obs.push(r)?;
            }
            match localize(&obs, &self.summary, self.threshold) {
                Ok(loc) => {
                    let tau = h.start + loc.position - 1;
                    let alarm_time = self.summary.n0 + stop;
                    report.tau_hat = Some(tau);
                    report.delay_vs_tau_hat = Some(alarm_time - tau);
                    report.localization = Some(loc);
                }
                Err(Error::LengthTooSmall { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(report)
    }
}

/// Change point of a pulled-out sequence: the smallest admissible split `t`
/// maximizing the profile statistic, centered with the training mean and
/// using the fitted dependence order. A peak whose standardized value is
/// below `confidence_cutoff` is flagged low-confidence.
pub fn localize<T: Real>(
    history: &Observations<T>,
    summary: &TrainingSummary<T>,
    confidence_cutoff: T,
) -> Result<Localization<T>> {
    let n = history.len();
    let m = summary.m_hat;
    let range = split_range(n, m).ok_or(Error::LengthTooSmall {
        length: n,
        dep_order: m,
        min_length: min_length(m),
    })?;
    let g = squared_gram(history, &summary.mean)?;
    let curve = profile_curve_from_gram(&g, n, m, range);
    let (position, peak) = curve
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, T)>, (t, v)| match best {
            Some((_, bv)) if v <= bv => best,
            _ => Some((t, v)),
        })
        .expect("non-empty split range");

    let a: Vec<T> = masked_profile_matrix(position, n, m)?;
    let mi = m as isize;
    let mut var = 0.0;
    for h1 in -mi..=mi {
        for h2 in -mi..=mi {
            let tr = summary.trace_table.entry(h1, h2).to_f64_lossy();
            var += lagged_overlap(&a, n, h1, h2) * tr * tr;
        }
    }
    let nf = n as f64;
    var *= 4.0 / (nf * nf * nf * nf);
    let peak_z = if var > 0.0 {
        T::of(peak.to_f64_lossy() / var.sqrt())
    } else {
        T::zero()
    };
    Ok(Localization {
        position,
        peak,
        peak_z,
        low_confidence: peak_z < confidence_cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{fit_training, TrainingConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, scale: f64, rng: &mut ChaCha8Rng) -> Observations<f64> {
        let data = (0..n * p)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect::<Vec<f64>>();
        Observations::from_flat(p, data).unwrap()
    }

    fn setup(n0: usize, h: usize) -> (Arc<TrainingSummary<f64>>, Observations<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let train = gaussian(n0, 20, 1.0, &mut rng);
        let s = fit_training(&train, &TrainingConfig { m_override: Some(0), ..TrainingConfig::new(h) }).unwrap();
        (Arc::new(s), train)
    }

    #[test]
    fn primed_detector_evaluates_first_observation() {
        let (s, train) = setup(60, 30);
        let mut d = Detector::new(s, &DetectorConfig::new(30, 1e6), Some(&train)).unwrap();
        let out = d.step(&[0.1; 20]).unwrap();
        assert!(matches!(out, StepOutcome::Monitoring { .. }));
        assert_eq!(d.report().unwrap().first_evaluation, Some(1));
    }

    #[test]
    fn short_training_defers_evaluation() {
        let (s, train) = setup(60, 30);
        let short = train.slice(50, 60);
        let mut d = Detector::new(s, &DetectorConfig::new(30, 1e6), Some(&short)).unwrap();
        for k in 1..=19 {
            assert_eq!(d.step(&[0.2; 20]).unwrap(), StepOutcome::Filling, "step {k}");
        }
        assert!(matches!(d.step(&[0.2; 20]).unwrap(), StepOutcome::Monitoring { .. }));
    }

    #[test]
    fn mismatched_window_is_rejected() {
        let (s, _) = setup(60, 30);
        let err = Detector::new(s, &DetectorConfig::new(40, 3.0), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn mismatched_order_is_rejected() {
        let (s, _) = setup(60, 30);
        let cfg = DetectorConfig { dep_order: Some(1), ..DetectorConfig::new(30, 3.0) };
        assert!(matches!(Detector::new(s, &cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn constant_stream_never_alarms() {
        let (s, _) = setup(60, 30);
        let x = s.mean.clone();
        let mut d = Detector::new(s, &DetectorConfig::new(30, 0.5), None).unwrap();
        for _ in 0..200 {
            let out = d.step(&x).unwrap();
            if let StepOutcome::Monitoring { std_stat } = out {
                assert!(std_stat.abs() < 1e-9);
            }
        }
        assert!(d.alarm().is_none());
        let r = d.report().unwrap();
        assert_eq!(r.stopping_time, None);
        assert_eq!(r.trajectory.len(), 200 - 29);
    }

    #[test]
    fn step_after_alarm_errors() {
        let (s, train) = setup(60, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = Detector::new(s, &DetectorConfig::new(30, 1.0), Some(&train)).unwrap();
        let big = gaussian(100, 20, 3.0, &mut rng);
        let mut stop = None;
        for row in big.rows() {
            if let StepOutcome::Alarm { stopping_time, std_stat } = d.step(row).unwrap() {
                assert!(std_stat.abs() > 1.0);
                stop = Some(stopping_time);
                break;
            }
        }
        let stop = stop.expect("scale change must alarm");
        assert_eq!(d.step(big.row(0)), Err(Error::AlreadyAlarmed { stopping_time: stop }));
        let r = d.report().unwrap();
        assert!(r.tau_hat.is_some());
        assert_eq!(r.delay_vs_tau_hat.unwrap(), 60 + stop - r.tau_hat.unwrap());
    }

    #[test]
    fn localize_ties_break_to_smallest_split() {
        let x = Observations::from_rows(2, &[[1.0, 1.0]; 12]).unwrap();
        let (s, _) = setup(60, 30);
        let mut summary = (*s).clone();
        summary.p = 2;
        summary.mean = vec![0.0, 0.0];
        let loc = localize(&x, &summary, 3.0).unwrap();
        let curve = crate::statistic::profile_curve(&x, &[0.0, 0.0], 0).unwrap();
        let max = curve.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let first = curve.iter().find(|c| c.1 == max).unwrap().0;
        assert_eq!(loc.position, first);
    }

    #[test]
    fn localize_too_short_history() {
        let (s, train) = setup(60, 30);
        let err = localize(&train.slice(0, 4), &s, 3.0).unwrap_err();
        assert!(matches!(err, Error::LengthTooSmall { .. }));
    }
}
