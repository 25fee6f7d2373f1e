//! CRSMDP data model: states, actions, transition kernel, cost matrices,
//! discount and risk factors, constraint specifications, derived cost
//! bounds, decision rules and ultimately stationary policies.
//!
//! Models are immutable after construction and safe to share across
//! threads. The JSON schema accepted by [`ModelFile`] is the on-disk
//! interchange format used by the CLI.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::Error;
use crate::Result;

/// Row-stochasticity tolerance applied everywhere in the crate.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Exponent magnitude beyond which `exp` is rejected as an overflow risk.
pub(crate) const MAX_EXPONENT: f64 = 700.0;

/// The four supported constraint families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Infinite-horizon standard discounted cost, `L(C) <= b`.
    #[serde(rename = "discounted_inf")]
    DiscountedInfinite,
    /// Infinite-horizon risk-sensitive cost, `J(C) <= b` with `b > 0`.
    #[serde(rename = "rs_inf")]
    RsInfinite,
    /// Finite-horizon standard discounted cost with its own horizon.
    #[serde(rename = "discounted_fin")]
    DiscountedFinite,
    /// Finite-horizon risk-sensitive cost with its own horizon.
    #[serde(rename = "rs_fin")]
    RsFinite,
}

impl ConstraintKind {
    pub fn is_finite(self) -> bool {
        matches!(
            self,
            ConstraintKind::DiscountedFinite | ConstraintKind::RsFinite
        )
    }

    pub fn is_rs(self) -> bool {
        matches!(self, ConstraintKind::RsInfinite | ConstraintKind::RsFinite)
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintKind::DiscountedInfinite => "discounted_inf",
            ConstraintKind::RsInfinite => "rs_inf",
            ConstraintKind::DiscountedFinite => "discounted_fin",
            ConstraintKind::RsFinite => "rs_fin",
        };
        f.write_str(s)
    }
}

/// One constraint: a cost matrix, an upper bound, and (for the finite
/// kinds) the horizon it applies over.
#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    /// m-by-n immediate cost matrix.
    pub cost: DMatrix<f64>,
    pub bound: f64,
    /// Present exactly when `kind.is_finite()`.
    pub horizon: Option<usize>,
}

impl ConstraintSpec {
    pub fn discounted_infinite(cost: DMatrix<f64>, bound: f64) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::DiscountedInfinite,
            cost,
            bound,
            horizon: None,
        }
    }

    pub fn rs_infinite(cost: DMatrix<f64>, bound: f64) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::RsInfinite,
            cost,
            bound,
            horizon: None,
        }
    }

    pub fn discounted_finite(cost: DMatrix<f64>, bound: f64, horizon: usize) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::DiscountedFinite,
            cost,
            bound,
            horizon: Some(horizon),
        }
    }

    pub fn rs_finite(cost: DMatrix<f64>, bound: f64, horizon: usize) -> Self {
        ConstraintSpec {
            kind: ConstraintKind::RsFinite,
            cost,
            bound,
            horizon: Some(horizon),
        }
    }
}

/// A single invariant violation found during validation.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

/// All violations found in a candidate model; empty means valid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.location, v.message)?;
        }
        Ok(())
    }
}

/// A finite-state, finite-action CRSMDP.
///
/// Transition rows are stored per `(state, action)` and are exactly
/// normalized at construction (inputs are accepted when within
/// [`STOCHASTIC_TOL`] of stochastic and renormalized row-wise, unless
/// renormalization is opted out of at load time).
#[derive(Debug, Clone)]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    state_names: Vec<String>,
    action_names: Vec<String>,
    /// `transitions[s][a][s']`
    transitions: Vec<Vec<Vec<f64>>>,
    objective_cost: DMatrix<f64>,
    beta: f64,
    gamma: f64,
    initial_state: usize,
    constraints: Vec<ConstraintSpec>,
}

impl MdpModel {
    /// Builds a model from raw parts, validating every invariant.
    /// Transition rows within tolerance of stochastic are renormalized.
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        objective_cost: DMatrix<f64>,
        beta: f64,
        gamma: f64,
        initial_state: usize,
        constraints: Vec<ConstraintSpec>,
    ) -> Result<Self> {
        Self::with_renormalize(
            transitions,
            objective_cost,
            beta,
            gamma,
            initial_state,
            constraints,
            true,
        )
    }

    /// As [`MdpModel::new`] but with row renormalization opt-out.
    pub fn with_renormalize(
        transitions: Vec<Vec<Vec<f64>>>,
        objective_cost: DMatrix<f64>,
        beta: f64,
        gamma: f64,
        initial_state: usize,
        constraints: Vec<ConstraintSpec>,
        renormalize: bool,
    ) -> Result<Self> {
        let num_states = transitions.len();
        let num_actions = transitions.first().map_or(0, |row| row.len());
        let mut model = MdpModel {
            num_states,
            num_actions,
            state_names: (0..num_states).map(|i| format!("s{i}")).collect(),
            action_names: (0..num_actions).map(|i| format!("a{i}")).collect(),
            transitions,
            objective_cost,
            beta,
            gamma,
            initial_state,
            constraints,
        };
        let report = model.validate();
        if !report.is_empty() {
            return Err(Error::InvalidModel(report));
        }
        if renormalize {
            for per_state in &mut model.transitions {
                for row in per_state {
                    let sum: f64 = row.iter().sum();
                    for p in row.iter_mut() {
                        *p /= sum;
                    }
                }
            }
        }
        Ok(model)
    }

    /// Replaces the default `s{i}`/`a{j}` names.
    pub fn with_names(mut self, states: Vec<String>, actions: Vec<String>) -> Result<Self> {
        if states.len() != self.num_states || actions.len() != self.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "expected {} state and {} action names, got {} and {}",
                self.num_states,
                self.num_actions,
                states.len(),
                actions.len()
            )));
        }
        self.state_names = states;
        self.action_names = actions;
        Ok(self)
    }

    /// Checks every model invariant, reporting each violation with its
    /// location. An empty report means the model is valid.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let (m, n) = (self.num_states, self.num_actions);
        if m == 0 {
            report.push("states", "at least one state required");
        }
        if n == 0 {
            report.push("actions", "at least one action required");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            report.push(
                "beta",
                format!(
                    "discount factor must lie strictly in (0,1), got {}",
                    self.beta
                ),
            );
        }
        if !(self.gamma != 0.0 && self.gamma.is_finite()) {
            report.push("gamma", "risk factor must be nonzero and finite");
        }
        if self.initial_state >= m {
            report.push(
                "initial_state",
                format!("index {} out of range (m = {m})", self.initial_state),
            );
        }
        if self.transitions.len() != m {
            report.push(
                "transitions",
                format!(
                    "expected {m} per-state entries, got {}",
                    self.transitions.len()
                ),
            );
        }
        for (s, per_state) in self.transitions.iter().enumerate() {
            if per_state.len() != n {
                report.push(
                    format!("transitions[{s}]"),
                    format!("expected {n} action rows, got {}", per_state.len()),
                );
                continue;
            }
            for (a, row) in per_state.iter().enumerate() {
                if row.len() != m {
                    report.push(
                        format!("transitions[{s}][{a}]"),
                        format!("expected {m} entries, got {}", row.len()),
                    );
                    continue;
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    report.push(
                        format!("transitions[{s}][{a}]"),
                        "probabilities must be finite and nonnegative",
                    );
                    continue;
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    report.push(
                        format!("transitions[{s}][{a}]"),
                        format!("row sums to {sum} (must be 1 within {STOCHASTIC_TOL:e})"),
                    );
                }
            }
        }
        if self.objective_cost.nrows() != m || self.objective_cost.ncols() != n {
            report.push(
                "objective_cost",
                format!(
                    "expected {m}x{n}, got {}x{}",
                    self.objective_cost.nrows(),
                    self.objective_cost.ncols()
                ),
            );
        }
        if self.objective_cost.iter().any(|c| !c.is_finite()) {
            report.push("objective_cost", "all entries must be finite");
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let loc = format!("constraints[{i}]");
            if c.cost.nrows() != m || c.cost.ncols() != n {
                report.push(
                    &loc,
                    format!(
                        "cost must be {m}x{n}, got {}x{}",
                        c.cost.nrows(),
                        c.cost.ncols()
                    ),
                );
            }
            if c.cost.iter().any(|v| !v.is_finite()) {
                report.push(&loc, "cost entries must be finite");
            }
            if !c.bound.is_finite() {
                report.push(&loc, "bound must be finite");
            }
            match (c.kind.is_finite(), c.horizon) {
                (true, None) => report.push(&loc, format!("kind {} requires a horizon", c.kind)),
                (true, Some(0)) => report.push(&loc, "horizon must be a positive integer"),
                (false, Some(_)) => {
                    report.push(&loc, format!("kind {} must not carry a horizon", c.kind))
                }
                _ => {}
            }
            if c.kind == ConstraintKind::RsInfinite && c.bound <= 0.0 {
                report.push(
                    &loc,
                    "rs_inf bound must be positive (risk-sensitive costs are positive, so the constraint would be trivially infeasible)",
                );
            }
        }
        report
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn objective_cost(&self) -> &DMatrix<f64> {
        &self.objective_cost
    }

    pub fn constraints(&self) -> &[ConstraintSpec] {
        &self.constraints
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    /// Transition row `p(.|s,a)`.
    pub fn probs(&self, s: usize, a: usize) -> &[f64] {
        &self.transitions[s][a]
    }

    pub fn transitions(&self) -> &Vec<Vec<Vec<f64>>> {
        &self.transitions
    }

    /// Largest finite-constraint horizon, if any constraint is finite.
    pub fn max_finite_horizon(&self) -> Option<usize> {
        self.constraints.iter().filter_map(|c| c.horizon).max()
    }
}

/// Uniform absolute cost bound and the derived truncation constants.
///
/// `c` bounds every cost matrix (objective and all constraints) in
/// absolute value; `k = c/(1-beta)` bounds every discounted sum; the
/// multiplicative factor `k_t(T) = exp(|gamma| k beta^T)` controls the
/// risk-sensitive truncation error.
#[derive(Debug, Clone, Copy)]
pub struct CostBounds {
    pub c: f64,
    pub k: f64,
    beta: f64,
    gamma_abs: f64,
}

impl CostBounds {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma_abs(&self) -> f64 {
        self.gamma_abs
    }

    /// `K_T = exp(|gamma| K beta^T)`; at least 1, strictly decreasing to 1.
    pub fn k_t(&self, horizon: usize) -> f64 {
        (self.gamma_abs * self.k * self.beta.powi(horizon as i32)).exp()
    }

    /// `K_T - 1` computed without cancellation.
    pub fn k_t_minus_one(&self, horizon: usize) -> f64 {
        (self.gamma_abs * self.k * self.beta.powi(horizon as i32)).exp_m1()
    }
}

/// Tightest uniform bound over the objective and every constraint cost.
pub fn cost_bound(model: &MdpModel) -> CostBounds {
    let mut c = model
        .objective_cost()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for spec in model.constraints() {
        c = spec.cost.iter().fold(c, |acc, v| acc.max(v.abs()));
    }
    CostBounds {
        c,
        k: c / (1.0 - model.beta()),
        beta: model.beta(),
        gamma_abs: model.gamma().abs(),
    }
}

/// As [`cost_bound`] but with a user-supplied looser bound `c` (useful to
/// reproduce published constants). `c` must not undercut the tight bound.
pub fn cost_bound_with_override(model: &MdpModel, c: f64) -> Result<CostBounds> {
    let tight = cost_bound(model);
    if c < tight.c {
        return Err(Error::DimensionMismatch(format!(
            "override bound {c} is below the tight uniform cost bound {}",
            tight.c
        )));
    }
    Ok(CostBounds {
        c,
        k: c / (1.0 - model.beta()),
        ..tight
    })
}

/// A Markovian randomized decision rule: a row-stochastic m-by-n matrix,
/// row s giving the action distribution in state s.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    probs: DMatrix<f64>,
}

impl DecisionRule {
    /// Validates row-stochasticity within [`STOCHASTIC_TOL`] and
    /// renormalizes rows exactly.
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        let mut probs = probs;
        for i in 0..probs.nrows() {
            let mut sum = 0.0;
            for j in 0..probs.ncols() {
                let p = probs[(i, j)];
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::DimensionMismatch(format!(
                        "decision rule row {i} has a negative or non-finite entry"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::DimensionMismatch(format!(
                    "decision rule row {i} sums to {sum} (must be 1 within {STOCHASTIC_TOL:e})"
                )));
            }
            for j in 0..probs.ncols() {
                probs[(i, j)] /= sum;
            }
        }
        Ok(DecisionRule { probs })
    }

    /// The rule that selects among all actions uniformly in every state.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        DecisionRule {
            probs: DMatrix::from_element(num_states, num_actions, p),
        }
    }

    /// The deterministic rule choosing `action` in every state.
    pub fn deterministic(num_states: usize, num_actions: usize, action: usize) -> Self {
        let mut probs = DMatrix::zeros(num_states, num_actions);
        for s in 0..num_states {
            probs[(s, action)] = 1.0;
        }
        DecisionRule { probs }
    }

    /// The deterministic rule choosing `actions[s]` in state `s`.
    pub fn deterministic_per_state(num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = DMatrix::zeros(actions.len(), num_actions);
        for (s, &a) in actions.iter().enumerate() {
            probs[(s, a)] = 1.0;
        }
        DecisionRule { probs }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.ncols()
    }

    /// `d(a|s)`.
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }
}

impl Serialize for DecisionRule {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.probs.nrows())
            .map(|i| self.probs.row(i).iter().copied().collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DecisionRule {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        let matrix = matrix_from_rows(&rows).map_err(serde::de::Error::custom)?;
        DecisionRule::new(matrix).map_err(serde::de::Error::custom)
    }
}

/// An ultimately stationary Markovian randomized policy: a finite prefix
/// of decision rules followed by a stationary tail rule. A stationary
/// policy has an empty prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    pub prefix: Vec<DecisionRule>,
    pub tail: DecisionRule,
}

impl MarkovPolicy {
    pub fn new(prefix: Vec<DecisionRule>, tail: DecisionRule) -> Self {
        MarkovPolicy { prefix, tail }
    }

    pub fn stationary(rule: DecisionRule) -> Self {
        MarkovPolicy {
            prefix: Vec::new(),
            tail: rule,
        }
    }

    /// The decision rule applied at epoch `t`.
    pub fn rule_at(&self, t: usize) -> &DecisionRule {
        self.prefix.get(t).unwrap_or(&self.tail)
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn num_states(&self) -> usize {
        self.tail.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.tail.num_actions()
    }
}

/// The rule that randomizes uniformly over the model's actions.
pub fn uniform_rule(model: &MdpModel) -> DecisionRule {
    DecisionRule::uniform(model.num_states(), model.num_actions())
}

/// Built-in single-state fixture on which the inner (Lower) truncation is
/// infeasible at every horizon while the original problem is feasible.
///
/// One state with a self-loop, two actions, discount 1/2, zero objective
/// cost, and two infinite-horizon discounted constraints whose costs sum
/// to 1 pointwise with both bounds equal to 1. Any policy accrues total
/// discounted cost exactly 2 across the two constraints, so the pair of
/// tightened bounds (each reduced by `K beta^T`) can never both hold, yet
/// the uniform stationary policy meets both original bounds with equality.
pub fn counterexample_model() -> MdpModel {
    let transitions = vec![vec![vec![1.0], vec![1.0]]];
    let objective = DMatrix::zeros(1, 2);
    let c1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let c2 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
    MdpModel::new(
        transitions,
        objective,
        0.5,
        1.0,
        0,
        vec![
            ConstraintSpec::discounted_infinite(c1, 1.0),
            ConstraintSpec::discounted_infinite(c2, 1.0),
        ],
    )
    .expect("fixture is valid")
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// On-disk JSON model description.
///
/// `initial_state` accepts either a state name or a zero-based index;
/// `horizon` is required exactly for the finite constraint kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub beta: f64,
    pub gamma: f64,
    pub initial_state: StateRef,
    pub objective_cost: Vec<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub kind: ConstraintKind,
    pub cost: Vec<Vec<f64>>,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::DimensionMismatch(format!("model JSON: {e}")))
    }

    /// Converts the raw description into a validated model.
    pub fn to_model(&self, renormalize: bool) -> Result<MdpModel> {
        let initial = match &self.initial_state {
            StateRef::Index(i) => *i,
            StateRef::Name(name) => {
                self.states.iter().position(|s| s == name).ok_or_else(|| {
                    Error::DimensionMismatch(format!("unknown initial state {name:?}"))
                })?
            }
        };
        let objective = matrix_from_rows(&self.objective_cost)?;
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            constraints.push(ConstraintSpec {
                kind: c.kind,
                cost: matrix_from_rows(&c.cost)?,
                bound: c.bound,
                horizon: c.horizon,
            });
        }
        MdpModel::with_renormalize(
            self.transitions.clone(),
            objective,
            self.beta,
            self.gamma,
            initial,
            constraints,
            renormalize,
        )?
        .with_names(self.states.clone(), self.actions.clone())
    }

    pub fn from_model(model: &MdpModel) -> Self {
        ModelFile {
            states: model.state_names().to_vec(),
            actions: model.action_names().to_vec(),
            transitions: model.transitions().clone(),
            beta: model.beta(),
            gamma: model.gamma(),
            initial_state: StateRef::Index(model.initial_state()),
            objective_cost: matrix_to_rows(model.objective_cost()),
            constraints: model
                .constraints()
                .iter()
                .map(|c| ConstraintFile {
                    kind: c.kind,
                    cost: matrix_to_rows(&c.cost),
                    bound: c.bound,
                    horizon: c.horizon,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn counterexample_fixture_is_valid() {
        let model = counterexample_model();
        assert!(model.validate().is_empty());
        assert_eq!(model.num_states(), 1);
        assert_eq!(model.num_actions(), 2);
        assert_eq!(model.constraints().len(), 2);
    }

    #[test]
    fn validation_flags_bad_row_sum() {
        let transitions = vec![vec![vec![0.9], vec![1.0]]];
        let err = MdpModel::new(transitions, DMatrix::zeros(1, 2), 0.5, 1.0, 0, vec![]);
        match err {
            Err(Error::InvalidModel(report)) => {
                assert_eq!(report.violations.len(), 1);
                assert!(report.violations[0].location.contains("transitions[0][0]"));
            }
            other => panic!("expected InvalidModel, got {other:?}"),
        }
    }

    #[test]
    fn validation_flags_zero_gamma() {
        let transitions = vec![vec![vec![1.0]]];
        let err = MdpModel::new(transitions, DMatrix::zeros(1, 1), 0.5, 0.0, 0, vec![]);
        match err {
            Err(Error::InvalidModel(report)) => {
                assert_eq!(report.violations.len(), 1);
                assert!(report.violations[0].message.contains("nonzero"));
            }
            other => panic!("expected InvalidModel, got {other:?}"),
        }
    }

    #[test]
    fn validation_flags_nonpositive_rs_bound() {
        let transitions = vec![vec![vec![1.0]]];
        let spec = ConstraintSpec::rs_infinite(DMatrix::zeros(1, 1), 0.0);
        let err = MdpModel::new(transitions, DMatrix::zeros(1, 1), 0.5, 1.0, 0, vec![spec]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn rows_within_tolerance_are_renormalized() {
        let eps = 4e-13;
        let transitions = vec![
            vec![vec![0.5 + eps, 0.5], vec![0.5, 0.5]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ];
        let model = MdpModel::new(transitions, DMatrix::zeros(2, 2), 0.5, 1.0, 0, vec![])
            .expect("valid within tolerance");
        let sum: f64 = model.probs(0, 0).iter().sum();
        assert!((sum - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn cost_bound_on_counterexample() {
        let model = counterexample_model();
        let bounds = cost_bound(&model);
        assert_eq!(bounds.c, 1.0);
        assert_eq!(bounds.k, 2.0);
    }

    #[test]
    fn cost_bound_zero_costs() {
        let transitions = vec![vec![vec![1.0]]];
        let model = MdpModel::new(transitions, DMatrix::zeros(1, 1), 0.5, 1.0, 0, vec![]).unwrap();
        let bounds = cost_bound(&model);
        assert_eq!(bounds.c, 0.0);
        assert_eq!(bounds.k, 0.0);
        for t in 1..10 {
            assert_eq!(bounds.k_t(t), 1.0);
        }
    }

    #[test]
    fn k_t_direct_substitution() {
        // beta = 1/2, C = 1, gamma = 1: K = 2 and K_1 = exp(2 * 0.5) = e.
        let model = counterexample_model();
        let bounds = cost_bound(&model);
        assert_relative_eq!(bounds.k_t(1), std::f64::consts::E, max_relative = 1e-15);
    }

    #[test]
    fn k_t_decreasing_to_one_and_guarded() {
        let model = counterexample_model();
        let b = cost_bound(&model);
        let mut prev = f64::INFINITY;
        for t in 1..=40 {
            let kt = b.k_t(t);
            assert!(kt >= 1.0);
            assert!(kt < prev);
            // e^u - 1 <= u e^u with u = |gamma| K beta^t <= |gamma| K beta
            let u = b.gamma_abs() * b.k * b.beta().powi(t as i32);
            assert!(b.k_t_minus_one(t) <= u * (b.gamma_abs() * b.k * b.beta()).exp() + 1e-15);
            prev = kt;
        }
    }

    #[test]
    fn cost_bound_monotone_in_constraints() {
        let transitions = vec![vec![vec![1.0], vec![1.0]]];
        let base = MdpModel::new(
            transitions.clone(),
            DMatrix::from_row_slice(1, 2, &[0.3, 0.1]),
            0.5,
            1.0,
            0,
            vec![],
        )
        .unwrap();
        let extended = MdpModel::new(
            transitions,
            DMatrix::from_row_slice(1, 2, &[0.3, 0.1]),
            0.5,
            1.0,
            0,
            vec![ConstraintSpec::discounted_infinite(
                DMatrix::from_row_slice(1, 2, &[2.0, 0.0]),
                1.0,
            )],
        )
        .unwrap();
        assert!(cost_bound(&extended).c >= cost_bound(&base).c);
        assert!(cost_bound(&extended).k >= cost_bound(&base).k);
    }

    #[test]
    fn cost_bound_override_must_be_looser() {
        let model = counterexample_model();
        assert!(cost_bound_with_override(&model, 0.5).is_err());
        let loose = cost_bound_with_override(&model, 3.0).unwrap();
        assert_eq!(loose.c, 3.0);
        assert_eq!(loose.k, 6.0);
    }

    #[test]
    fn uniform_rule_rows() {
        for n in [1usize, 2, 4] {
            let rule = DecisionRule::uniform(2, n);
            for s in 0..2 {
                for a in 0..n {
                    assert_eq!(rule.prob(s, a), 1.0 / n as f64);
                }
                let sum: f64 = (0..n).map(|a| rule.prob(s, a)).sum();
                assert!((sum - 1.0).abs() <= STOCHASTIC_TOL);
            }
        }
    }

    #[test]
    fn decision_rule_rejects_bad_rows() {
        assert!(DecisionRule::new(DMatrix::from_row_slice(1, 2, &[0.7, 0.2])).is_err());
        assert!(DecisionRule::new(DMatrix::from_row_slice(1, 2, &[-0.1, 1.1])).is_err());
        assert!(DecisionRule::new(DMatrix::from_row_slice(1, 2, &[0.25, 0.75])).is_ok());
    }

    #[test]
    fn policy_rule_lookup() {
        let prefix = vec![
            DecisionRule::deterministic(1, 2, 0),
            DecisionRule::deterministic(1, 2, 1),
        ];
        let policy = MarkovPolicy::new(prefix, DecisionRule::uniform(1, 2));
        assert_eq!(policy.rule_at(0).prob(0, 0), 1.0);
        assert_eq!(policy.rule_at(1).prob(0, 1), 1.0);
        assert_eq!(policy.rule_at(5).prob(0, 1), 0.5);
    }

    #[test]
    fn model_file_round_trip() {
        let model = counterexample_model();
        let file = ModelFile::from_model(&model);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed = ModelFile::parse(&text).unwrap().to_model(true).unwrap();
        assert_eq!(parsed.num_states(), 1);
        assert_eq!(parsed.beta(), 0.5);
        assert_eq!(parsed.constraints().len(), 2);
        assert_eq!(parsed.constraints()[0].cost[(0, 0)], 1.0);
    }

    #[test]
    fn model_file_accepts_state_name() {
        let text = r#"{
            "states": ["idle"], "actions": ["go", "stay"],
            "transitions": [[[1.0], [1.0]]],
            "beta": 0.5, "gamma": 1.0,
            "initial_state": "idle",
            "objective_cost": [[0.0, 0.0]],
            "constraints": [{"kind": "rs_fin", "cost": [[1.0, 0.0]], "bound": 2.0, "horizon": 3}]
        }"#;
        let model = ModelFile::parse(text).unwrap().to_model(true).unwrap();
        assert_eq!(model.initial_state(), 0);
        assert_eq!(model.constraints()[0].kind, ConstraintKind::RsFinite);
        assert_eq!(model.constraints()[0].horizon, Some(3));
    }
}
