//! Solver library for constrained risk-sensitive Markov decision processes.
//!
//! The problem class: minimise the expected exponential utility of the
//! infinite-horizon discounted cost, subject to upper bounds on standard
//! discounted and risk-sensitive costs over finite and infinite horizons.
//! The solver truncates the problem to a finite horizon with perturbed
//! constraint bounds (an inner and an outer approximation), builds an
//! occupation-measure linear program on an augmented state space, and
//! extracts an ultimately stationary randomized policy together with
//! certified error bounds against the original problem.
//!
//! Modules:
//! - [`model`]: the CRSMDP data model, validation, derived cost bounds and
//!   built-in fixtures.
//! - [`eval`]: exact policy evaluation (discounted and risk-sensitive,
//!   finite and infinite horizon).
//! - [`metric`]: the metric on policy space and Lipschitz constants.
//! - [`truncation`]: perturbed constraint bounds, feasibility checks and
//!   the maximum-violation map.
//! - [`lp`]: a self-contained dense two-phase simplex solver.
//! - [`augmented`]: the augmented chain, occupation-measure LP, policy
//!   extraction and the end-to-end solve pipeline.
//! - [`oracle`]: independent brute-force references (path enumeration,
//!   multiplicative dynamic programming, grid search).
//! - [`sampling`]: seeded random models and policies for self-tests.

pub use nalgebra;

pub mod augmented;
pub mod error;
pub mod eval;
pub mod exec;
pub mod lp;
pub mod metric;
pub mod model;
pub mod oracle;
pub mod sampling;
pub mod truncation;

pub use error::Error;
pub use model::{
    cost_bound, counterexample_model, uniform_rule, ConstraintKind, ConstraintSpec, CostBounds,
    DecisionRule, MarkovPolicy, MdpModel,
};
pub use truncation::Mode;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
