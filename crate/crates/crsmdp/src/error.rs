//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model:\n{0}")]
    InvalidModel(crate::model::ValidationReport),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("risk scale too large: |gamma|*K = {0:.6} exceeds the exponential range")]
    RiskScaleTooLarge(f64),

    #[error("tolerance unreachable: required horizon exceeds cap {cap}")]
    ToleranceUnreachable { cap: usize },

    #[error("horizon cap exceeded while searching for an epsilon-sufficient horizon (cap {cap})")]
    HorizonCapExceeded { cap: usize },

    #[error("horizon {horizon} is below the finite-constraint horizon {required} of constraint {constraint}")]
    HorizonBelowFiniteConstraint {
        horizon: usize,
        required: usize,
        constraint: usize,
    },

    #[error("state budget exceeded: layer {layer} holds {size} augmented states (cap {cap})")]
    StateBudgetExceeded {
        layer: usize,
        size: usize,
        cap: usize,
    },

    #[error("enumeration budget exceeded: (m*n)^T = {paths:.3e} paths (budget {budget:.1e})")]
    EnumerationBudgetExceeded { paths: f64, budget: f64 },

    #[error("instance too large for grid search: {0}")]
    InstanceTooLarge(String),

    #[error("no feasible grid point")]
    NoFeasibleGridPoint,

    #[error("prefix must be nonempty")]
    EmptyPrefix,

    #[error("numerically degenerate linear program: {0}")]
    NumericallyDegenerate(String),

    #[error("internal error: {0}")]
    Internal(String),
}
