use thiserror::Error;

/// Errors raised by the statistics, estimators, calibration and detector.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value is outside its valid range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A weight plan was requested for a length that cannot host the
    /// split-point sum for the given dependence order.
    #[error("length {length} too small for dependence order {dep_order}: need at least {min_length}")]
    LengthTooSmall {
        length: usize,
        dep_order: usize,
        min_length: usize,
    },

    /// Input data has the wrong shape or contains non-finite values.
    #[error("invalid input: {0}")]
    Input(String),

    /// An index argument violates the operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The training sample is too short for the requested estimate.
    #[error("insufficient training data: have {have} observations, need at least {need}")]
    InsufficientTraining { have: usize, need: usize },

    /// No lag up to the configured maximum passed the dependence cutoff.
    #[error("temporal dependence too strong: no lag up to {max_lag} met the cutoff {epsilon}")]
    DependenceTooStrong { max_lag: usize, epsilon: f64 },

    /// A variance or scale estimate came out non-positive.
    #[error("numerically degenerate: {0}")]
    Degenerate(String),

    /// The requested calibration target cannot be reached.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Quadrature or root finding failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The detector already raised an alarm; restart is the caller's job.
    #[error("detector already alarmed at stopping time {stopping_time}")]
    AlreadyAlarmed { stopping_time: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
