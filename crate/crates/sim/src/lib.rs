//! Synthetic moving-average streams with planted covariance changes, exact
//! population oracles for them, and Monte Carlo studies of the detector.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod factor;
pub mod generator;
pub mod montecarlo;
pub mod population;
pub mod scenario;

pub use factor::{build_q, cholesky, ChangeModel, Factor};
pub use generator::{gen_stream, lag_coefficients, Base, GeneratorSpec, Innovation, PostChange, StreamGenerator};
pub use montecarlo::{
    m_selection_study, monte_carlo_arl, monte_carlo_edd, run_replicate, stationarity_rejection_rate, DepOrderChoice,
    EddStudy, McConfig, McResult, OrderSelection, Replicate, SummaryRecipe,
};
pub use population::{change_norm, lag_weight, min_detectable_rho, population_edd_bound, Population};
pub use scenario::{render_table, run_scenario, Cell, CellOutcome, Scenario};
