//! Seeded random models and policies for self-tests and property suites.
//!
//! Everything here is deterministic given the RNG state; costs land in
//! [0, 1] so the uniform cost bound stays desk scale.

use nalgebra::DMatrix;
use rand::Rng;

use crate::model::{ConstraintKind, ConstraintSpec, DecisionRule, MarkovPolicy, MdpModel};

/// Ranges for random model generation.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    pub max_states: usize,
    pub max_actions: usize,
    pub beta_range: (f64, f64),
    /// `|gamma|` is drawn from this range; the sign is a fair coin.
    pub gamma_abs_range: (f64, f64),
}

impl Default for ModelSpace {
    fn default() -> Self {
        ModelSpace {
            max_states: 3,
            max_actions: 3,
            beta_range: (0.3, 0.8),
            gamma_abs_range: (0.1, 1.0),
        }
    }
}

fn random_stochastic_row(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// A random unconstrained model within `space`.
pub fn random_model(rng: &mut impl Rng, space: &ModelSpace) -> MdpModel {
    let m = rng.gen_range(1..=space.max_states);
    let n = rng.gen_range(1..=space.max_actions);
    let transitions: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|_| (0..n).map(|_| random_stochastic_row(rng, m)).collect())
        .collect();
    let cost = DMatrix::from_fn(m, n, |_, _| rng.gen_range(0.0..1.0));
    let beta = rng.gen_range(space.beta_range.0..space.beta_range.1);
    let gamma_abs = rng.gen_range(space.gamma_abs_range.0..space.gamma_abs_range.1);
    let gamma = if rng.gen_bool(0.5) {
        gamma_abs
    } else {
        -gamma_abs
    };
    let initial = rng.gen_range(0..m);
    MdpModel::new(transitions, cost, beta, gamma, initial, vec![]).expect("sampled model is valid")
}

/// A random row-stochastic rule with strictly positive entries.
pub fn random_rule(rng: &mut impl Rng, num_states: usize, num_actions: usize) -> DecisionRule {
    let mut probs = DMatrix::zeros(num_states, num_actions);
    for s in 0..num_states {
        let row = random_stochastic_row(rng, num_actions);
        for (a, v) in row.into_iter().enumerate() {
            probs[(s, a)] = v;
        }
    }
    DecisionRule::new(probs).expect("sampled rule is row-stochastic")
}

/// A random ultimately stationary policy with prefix length up to
/// `max_prefix`.
pub fn random_policy(rng: &mut impl Rng, model: &MdpModel, max_prefix: usize) -> MarkovPolicy {
    let (m, n) = (model.num_states(), model.num_actions());
    let prefix_len = rng.gen_range(0..=max_prefix);
    let prefix = (0..prefix_len).map(|_| random_rule(rng, m, n)).collect();
    MarkovPolicy::new(prefix, random_rule(rng, m, n))
}

/// A random rule near a reference rule: each row is a convex mixture
/// `(1 - w) ref + w noise` with `w <= spread`.
pub fn perturbed_rule(rng: &mut impl Rng, reference: &DecisionRule, spread: f64) -> DecisionRule {
    let (m, n) = (reference.num_states(), reference.num_actions());
    let noise = random_rule(rng, m, n);
    let w = rng.gen_range(0.0..spread);
    let probs = reference.matrix() * (1.0 - w) + noise.matrix() * w;
    DecisionRule::new(probs).expect("mixture of stochastic rows is stochastic")
}

/// Attaches constraints to `model` calibrated so that a reference policy
/// (uniform stationary) satisfies them with the given slack fractions.
/// Positive `slack` leaves the reference strictly feasible.
pub fn with_calibrated_constraints(
    model: &MdpModel,
    rng: &mut impl Rng,
    kinds: &[(ConstraintKind, f64, Option<usize>)],
) -> MdpModel {
    let (m, n) = (model.num_states(), model.num_actions());
    let reference = MarkovPolicy::stationary(DecisionRule::uniform(m, n));
    let x = model.initial_state();
    let mut constraints = Vec::with_capacity(kinds.len());
    for &(kind, slack, horizon) in kinds {
        let cost = DMatrix::from_fn(m, n, |_, _| rng.gen_range(0.0..1.0));
        let bound = match kind {
            ConstraintKind::DiscountedInfinite => {
                crate::eval::discounted_cost_infinite(model, &reference, &cost).unwrap()[x] + slack
            }
            ConstraintKind::DiscountedFinite => {
                crate::eval::discounted_cost_finite(model, &reference, &cost, horizon.unwrap())
                    .unwrap()[x]
                    + slack
            }
            ConstraintKind::RsInfinite => {
                let cert =
                    crate::eval::rs_cost_infinite(model, &reference, &cost, 1e-9, 10_000).unwrap();
                cert.upper(x) * (1.0 + slack)
            }
            ConstraintKind::RsFinite => {
                crate::eval::rs_cost_finite(model, &reference, &cost, horizon.unwrap()).unwrap()[x]
                    * (1.0 + slack)
            }
        };
        constraints.push(ConstraintSpec {
            kind,
            cost,
            bound,
            horizon,
        });
    }
    MdpModel::new(
        model.transitions().clone(),
        model.objective_cost().clone(),
        model.beta(),
        model.gamma(),
        model.initial_state(),
        constraints,
    )
    .expect("calibrated model is valid")
}
