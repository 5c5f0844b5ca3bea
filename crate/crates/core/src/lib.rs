//! Online detection of changes in the covariance structure of
//! high-dimensional vector streams.
//!
//! A training sample fixes the mean, the temporal dependence order and the
//! null scale of a windowed, split-point weighted U-statistic of squared
//! inner products. The [`Detector`] raises an alarm the first time the
//! standardized statistic over the last `H` observations exceeds a threshold
//! in absolute value; [`calibrate`] converts a target average run length into
//! that threshold.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below name the concrete instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod dependence;
pub mod detector;
mod error;
mod observations;
mod real;
pub mod statistic;
mod sum;
pub mod weights;
pub mod window;

pub use calibrate::{
    edd_upper_bound, g_value, min_detectable_change, run_length_cdf, solve_threshold,
    theoretical_arl, CalibrationResult, EddBound,
};
pub use dependence::{
    estimate_dep_order, estimate_null_sd, estimate_trace_cross, fit_training, stationarity_test,
    Stationarity, TraceTable, TrainingConfig, TrainingGram, TrainingSummary,
};
pub use detector::{localize, DetectionReport, Detector, DetectorConfig, Localization, StepOutcome};
pub use error::{Error, Result};
pub use observations::Observations;
pub use real::Real;
pub use statistic::{profile_curve, profile_statistic, statistic_batch};
pub use sum::CompensatedSum;
pub use weights::{profile_weight, WeightPlan};
pub use window::WindowState;

pub type ObservationsF64 = Observations<f64>;
pub type WeightPlanF64 = WeightPlan<f64>;
pub type WindowStateF64 = WindowState<f64>;
pub type TrainingSummaryF64 = TrainingSummary<f64>;
pub type DetectorF64 = Detector<f64>;
pub type DetectorConfigF64 = DetectorConfig<f64>;
pub type DetectionReportF64 = DetectionReport<f64>;
pub type CalibrationResultF64 = CalibrationResult<f64>;

pub type ObservationsF32 = Observations<f32>;
pub type WeightPlanF32 = WeightPlan<f32>;
pub type WindowStateF32 = WindowState<f32>;
pub type TrainingSummaryF32 = TrainingSummary<f32>;
pub type DetectorF32 = Detector<f32>;
pub type DetectorConfigF32 = DetectorConfig<f32>;
pub type DetectionReportF32 = DetectionReport<f32>;
pub type CalibrationResultF32 = CalibrationResult<f32>;
