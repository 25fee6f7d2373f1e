//! Augmented state space, occupation-measure LP, policy extraction, and
//! the end-to-end solve pipeline.
//!
//! Each risk-sensitive cost in play (the objective plus every
//! risk-sensitive constraint) contributes a running multiplicative
//! accumulator `psi = exp(gamma * accumulated discounted cost)` to the
//! state. The augmented chain is layered by epoch; layer t+1 is generated
//! by applying every action to every layer-t state and multiplying the
//! accumulators by `exp(gamma beta^t cost(s,a))` (finite-horizon
//! accumulators freeze once their own horizon is reached). States whose
//! base states match and whose accumulators agree within a relative
//! tolerance are merged, which keeps layers small whenever per-step costs
//! repeat. The LP minimizes the expected terminal objective accumulator
//! over occupation measures `y(t,z,a)` subject to flow conservation,
//! terminal rows for risk-sensitive constraints, and running-cost rows
//! for discounted constraints. A Markov policy is read off the optimal
//! measure by marginalizing over accumulators and normalizing per state.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::eval::{self, CertifiedValue};
use crate::exec;
use crate::lp::{solve_lp, LpProblem, LpSolution, LpStatus};
use crate::model::{ConstraintKind, DecisionRule, MarkovPolicy, MdpModel};
use crate::truncation::{check_feasibility, FeasibilityVerdict, Mode, TruncatedBounds};
use crate::Result;

/// Default relative tolerance for merging accumulator values.
pub const DEFAULT_MERGE_TOL: f64 = 1e-12;
/// Default cap on augmented states per layer.
pub const DEFAULT_LAYER_CAP: usize = 200_000;

/// One augmented state: base state plus the objective accumulator and one
/// accumulator per risk-sensitive constraint (truncated-infinite first,
/// then finite-horizon, each in model order).
#[derive(Debug, Clone)]
pub struct AugmentedState {
    pub base: usize,
    pub psi_objective: f64,
    pub psi_rs: Vec<f64>,
}

/// The layered augmented chain over epochs `0..=horizon`.
#[derive(Debug)]
pub struct AugmentedChain {
    pub horizon: usize,
    /// `layers[t]` for `t = 0..=horizon`; layer 0 is the single state
    /// `(initial_state, 1, ..., 1)`.
    pub layers: Vec<Vec<AugmentedState>>,
    /// `transitions[t][z * n + a]` lists `(next index in layer t+1, probability)`.
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    /// Model constraint index backing each accumulator slot.
    pub rs_constraint_indices: Vec<usize>,
}

impl AugmentedChain {
    /// Objective accumulator of every terminal-layer state.
    pub fn terminal_objective(&self) -> Vec<f64> {
        self.layers[self.horizon]
            .iter()
            .map(|z| z.psi_objective)
            .collect()
    }

    /// Accumulator of slot `slot` over the terminal layer.
    pub fn terminal_rs(&self, slot: usize) -> Vec<f64> {
        self.layers[self.horizon]
            .iter()
            .map(|z| z.psi_rs[slot])
            .collect()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.len()).collect()
    }
}

fn merge_key_equal(a: &AugmentedState, b: &AugmentedState, tol: f64) -> bool {
    if a.base != b.base {
        return false;
    }
    let close = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs());
    close(a.psi_objective, b.psi_objective)
        && a.psi_rs
            .iter()
            .zip(b.psi_rs.iter())
            .all(|(&x, &y)| close(x, y))
}

fn state_order(a: &AugmentedState, b: &AugmentedState) -> std::cmp::Ordering {
    a.base
        .cmp(&b.base)
        .then_with(|| a.psi_objective.total_cmp(&b.psi_objective))
        .then_with(|| {
            for (x, y) in a.psi_rs.iter().zip(b.psi_rs.iter()) {
                let ord = x.total_cmp(y);
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
}

/// Builds the layered augmented chain for horizon `T`.
///
/// Requires `T >= 1` and `T` at least every finite risk-sensitive
/// constraint horizon. Fails with a state-budget error if any layer still
/// exceeds `layer_cap` after merging.
pub fn build_augmented_chain(
    model: &MdpModel,
    horizon: usize,
    merge_tol: f64,
    layer_cap: usize,
) -> Result<AugmentedChain> {
    if horizon == 0 {
        return Err(Error::DimensionMismatch(
            "horizon must be a positive integer".into(),
        ));
    }
    let mut rs_constraint_indices: Vec<usize> = Vec::new();
    for (i, c) in model.constraints().iter().enumerate() {
        if c.kind == ConstraintKind::RsInfinite {
            rs_constraint_indices.push(i);
        }
    }
    for (i, c) in model.constraints().iter().enumerate() {
        if c.kind == ConstraintKind::RsFinite {
            rs_constraint_indices.push(i);
            let own = c.horizon.unwrap_or(0);
            if horizon < own {
                return Err(Error::HorizonBelowFiniteConstraint {
                    horizon,
                    required: own,
                    constraint: i,
                });
            }
        }
    }
    let slots = rs_constraint_indices.len();
    let gamma = model.gamma();
    let beta = model.beta();
    let n = model.num_actions();

    let mut layers = vec![vec![AugmentedState {
        base: model.initial_state(),
        psi_objective: 1.0,
        psi_rs: vec![1.0; slots],
    }]];
    let mut transitions: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let scale = gamma * beta.powi(t as i32);
        let current = &layers[t];
        let mut candidates: Vec<AugmentedState> = Vec::new();
        let mut raw: Vec<Vec<(usize, f64)>> = vec![Vec::new(); current.len() * n];
        for (zi, z) in current.iter().enumerate() {
            for a in 0..n {
                let psi_objective =
                    z.psi_objective * (scale * model.objective_cost()[(z.base, a)]).exp();
                let psi_rs: Vec<f64> = rs_constraint_indices
                    .iter()
                    .zip(z.psi_rs.iter())
                    .map(|(&ci, &psi)| {
                        let spec = &model.constraints()[ci];
                        let active = match spec.kind {
                            ConstraintKind::RsInfinite => true,
                            ConstraintKind::RsFinite => t < spec.horizon.unwrap(),
                            _ => unreachable!(),
                        };
                        if active {
                            psi * (scale * spec.cost[(z.base, a)]).exp()
                        } else {
                            psi
                        }
                    })
                    .collect();
                for (s2, &p) in model.probs(z.base, a).iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    candidates.push(AugmentedState {
                        base: s2,
                        psi_objective,
                        psi_rs: psi_rs.clone(),
                    });
                    raw[zi * n + a].push((candidates.len() - 1, p));
                }
            }
        }

        // Merge near-identical candidates: sort, then cluster around the
        // first element of each run.
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| state_order(&candidates[a], &candidates[b]));
        let mut remap = vec![usize::MAX; candidates.len()];
        let mut merged: Vec<AugmentedState> = Vec::new();
        for &ci in &order {
            if let Some(rep) = merged.last() {
                if merge_key_equal(rep, &candidates[ci], merge_tol) {
                    remap[ci] = merged.len() - 1;
                    continue;
                }
            }
            merged.push(candidates[ci].clone());
            remap[ci] = merged.len() - 1;
        }
        if merged.len() > layer_cap {
            return Err(Error::StateBudgetExceeded {
                layer: t + 1,
                size: merged.len(),
                cap: layer_cap,
            });
        }
        let layer_transitions: Vec<Vec<(usize, f64)>> = raw
            .into_iter()
            .map(|list| list.into_iter().map(|(ci, p)| (remap[ci], p)).collect())
            .collect();
        transitions.push(layer_transitions);
        layers.push(merged);
    }

    Ok(AugmentedChain {
        horizon,
        layers,
        transitions,
        rs_constraint_indices,
    })
}

fn var_offsets(chain: &AugmentedChain, n: usize) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(chain.horizon);
    let mut total = 0;
    for t in 0..chain.horizon {
        offsets.push(total);
        total += chain.layers[t].len() * n;
    }
    (offsets, total)
}

/// Assembles the occupation-measure LP for the chain under the given
/// truncated bounds (Lower or Upper mode, same horizon as the chain).
pub fn build_occupation_lp(
    chain: &AugmentedChain,
    model: &MdpModel,
    bounds: &TruncatedBounds,
    with_names: bool,
) -> Result<LpProblem> {
    if bounds.mode == Mode::Original {
        return Err(Error::DimensionMismatch(
            "occupation LP requires lower or upper mode".into(),
        ));
    }
    if bounds.horizon != Some(chain.horizon) {
        return Err(Error::DimensionMismatch(format!(
            "bounds horizon {:?} does not match chain horizon {}",
            bounds.horizon, chain.horizon
        )));
    }
    let n = model.num_actions();
    let t_last = chain.horizon - 1;
    let (offsets, num_vars) = var_offsets(chain, n);
    let var = |t: usize, z: usize, a: usize| offsets[t] + z * n + a;

    // Objective: expected terminal objective accumulator.
    let mut objective = vec![0.0; num_vars];
    for z in 0..chain.layers[t_last].len() {
        for a in 0..n {
            let coef: f64 = chain.transitions[t_last][z * n + a]
                .iter()
                .map(|&(z2, p)| chain.layers[chain.horizon][z2].psi_objective * p)
                .sum();
            objective[var(t_last, z, a)] = coef;
        }
    }
    let mut lp = LpProblem::new(num_vars, objective);

    // Unit initial flow.
    let mut row = vec![0.0; num_vars];
    for a in 0..n {
        row[var(0, 0, a)] = 1.0;
    }
    lp.push_eq(row, 1.0);

    // Flow conservation per interior layer state.
    for t in 1..chain.horizon {
        let mut rows = vec![vec![0.0; num_vars]; chain.layers[t].len()];
        for z in 0..chain.layers[t - 1].len() {
            for a in 0..n {
                for &(z2, p) in &chain.transitions[t - 1][z * n + a] {
                    rows[z2][var(t - 1, z, a)] -= p;
                }
            }
        }
        for (z2, mut row) in rows.into_iter().enumerate() {
            for a in 0..n {
                row[var(t, z2, a)] += 1.0;
            }
            lp.push_eq(row, 0.0);
        }
    }

    // Constraint rows, in model order.
    for eff in bounds.effective() {
        let spec = &model.constraints()[eff.index];
        let mut row = vec![0.0; num_vars];
        if eff.kind.is_rs() {
            let slot = chain
                .rs_constraint_indices
                .iter()
                .position(|&ci| ci == eff.index)
                .ok_or_else(|| {
                    Error::Internal("constraint missing from accumulator slots".into())
                })?;
            for z in 0..chain.layers[t_last].len() {
                for a in 0..n {
                    let coef: f64 = chain.transitions[t_last][z * n + a]
                        .iter()
                        .map(|&(z2, p)| chain.layers[chain.horizon][z2].psi_rs[slot] * p)
                        .sum();
                    row[var(t_last, z, a)] = coef;
                }
            }
        } else {
            let active_until = match eff.kind {
                ConstraintKind::DiscountedInfinite => chain.horizon,
                ConstraintKind::DiscountedFinite => spec.horizon.unwrap(),
                _ => unreachable!(),
            };
            for t in 0..active_until {
                let weight = model.beta().powi(t as i32);
                for (z, state) in chain.layers[t].iter().enumerate() {
                    for a in 0..n {
                        row[var(t, z, a)] = weight * spec.cost[(state.base, a)];
                    }
                }
            }
        }
        lp.push_ineq(row, eff.bound);
    }

    if with_names {
        let mut names = Vec::with_capacity(num_vars);
        for t in 0..chain.horizon {
            for z in 0..chain.layers[t].len() {
                for a in 0..n {
                    names.push(format!("y(t{t},z{z},a{a})"));
                }
            }
        }
        lp.var_names = Some(names);
        let mut eq_names = vec!["init".to_string()];
        for t in 1..chain.horizon {
            for z in 0..chain.layers[t].len() {
                eq_names.push(format!("flow(t{t},z{z})"));
            }
        }
        lp.eq_names = Some(eq_names);
        lp.ineq_names = Some(
            bounds
                .effective()
                .iter()
                .map(|e| format!("c{}:{}", e.index, e.kind))
                .collect(),
        );
    }
    Ok(lp)
}

/// Marginalizes the optimal occupation measure to per-epoch decision
/// rules: `d_t(a|s)` proportional to the measure of `(t, s, a)` summed
/// over accumulator values. States unreachable under the measure get the
/// uniform rule.
pub fn extract_policy(
    chain: &AugmentedChain,
    model: &MdpModel,
    sol: &LpSolution,
) -> Result<Vec<DecisionRule>> {
    let y = sol
        .y
        .as_ref()
        .ok_or_else(|| Error::Internal("policy extraction requires an optimal solution".into()))?;
    let (m, n) = (model.num_states(), model.num_actions());
    let (offsets, _) = var_offsets(chain, n);
    let mut rules = Vec::with_capacity(chain.horizon);
    for t in 0..chain.horizon {
        let mut mass = nalgebra::DMatrix::<f64>::zeros(m, n);
        for (z, state) in chain.layers[t].iter().enumerate() {
            for a in 0..n {
                mass[(state.base, a)] += y[offsets[t] + z * n + a];
            }
        }
        let mut probs = nalgebra::DMatrix::<f64>::zeros(m, n);
        for s in 0..m {
            let total: f64 = (0..n).map(|a| mass[(s, a)]).sum();
            if total <= 1e-12 {
                for a in 0..n {
                    probs[(s, a)] = 1.0 / n as f64;
                }
            } else {
                for a in 0..n {
                    probs[(s, a)] = (mass[(s, a)] / total).max(0.0);
                }
            }
        }
        rules.push(DecisionRule::new(probs)?);
    }
    Ok(rules)
}

/// How the stationary tail of the returned policy is chosen. Feasibility
/// and optimality of the truncated problems depend only on the first T
/// rules, so any tail yields the same truncated value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TailChoice {
    #[default]
    Uniform,
    /// Repeat the last prefix rule forever.
    Last,
}

/// Extends a nonempty finite prefix to an ultimately stationary policy.
pub fn extend_ultimately_stationary(
    prefix: Vec<DecisionRule>,
    tail: TailChoice,
) -> Result<MarkovPolicy> {
    let Some(last) = prefix.last() else {
        return Err(Error::EmptyPrefix);
    };
    let tail_rule = match tail {
        TailChoice::Uniform => DecisionRule::uniform(last.num_states(), last.num_actions()),
        TailChoice::Last => last.clone(),
    };
    Ok(MarkovPolicy::new(prefix, tail_rule))
}

/// Knobs for [`solve_crsmdp`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub merge_tol: f64,
    pub layer_cap: usize,
    /// Absolute slack tolerance for the feasibility verdict.
    pub feasibility_tol: f64,
    /// Target radius for the certified infinite-horizon objective.
    pub certify_tol: f64,
    pub tail: TailChoice,
    /// Attach variable/row names to the LP (for debug dumps).
    pub with_names: bool,
    /// Optional looser uniform cost bound.
    pub cost_bound_override: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            merge_tol: DEFAULT_MERGE_TOL,
            layer_cap: DEFAULT_LAYER_CAP,
            feasibility_tol: crate::truncation::DEFAULT_FEASIBILITY_TOL,
            certify_tol: 1e-6,
            tail: TailChoice::Uniform,
            with_names: false,
            cost_bound_override: None,
        }
    }
}

/// Everything a solve produces.
#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub layer_sizes: Vec<usize>,
    pub lp_variables: usize,
    pub lp_equalities: usize,
    pub lp_inequalities: usize,
    pub pivots: u64,
    pub wall_ms: f64,
    pub merge_tolerance: f64,
    /// `|J_T(extracted policy) - LP objective|`; the marginalized
    /// extraction is exact on every fixture tested, but the gap is
    /// reported rather than assumed zero.
    pub extraction_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub horizon: usize,
    pub status: LpStatus,
    /// Optimal truncated objective value `J_T` at the initial state.
    pub value: Option<f64>,
    pub policy: Option<MarkovPolicy>,
    /// Verdict of the returned policy against the ORIGINAL constraints.
    pub feasibility: Option<FeasibilityVerdict>,
    /// Smallest eps for which the returned policy is eps-feasible.
    pub epsilon_achieved: Option<f64>,
    /// Certified infinite-horizon objective of the returned policy.
    pub certified_objective: Option<CertifiedValue>,
    pub stats: SolveStats,
}

/// Full pipeline: truncated bounds, augmented chain, occupation LP,
/// simplex, policy extraction, ultimately stationary extension, and a
/// feasibility/certification report against the original problem.
pub fn solve_crsmdp(
    model: &MdpModel,
    horizon: usize,
    mode: Mode,
    options: &SolveOptions,
) -> Result<SolveReport> {
    if mode == Mode::Original {
        return Err(Error::DimensionMismatch(
            "solve operates in lower or upper mode".into(),
        ));
    }
    let start = Instant::now();
    let cost_bounds = match options.cost_bound_override {
        Some(c) => crate::model::cost_bound_with_override(model, c)?,
        None => crate::model::cost_bound(model),
    };
    let bounds = TruncatedBounds::with_bounds(model, mode, Some(horizon), &cost_bounds)?;
    let chain = build_augmented_chain(model, horizon, options.merge_tol, options.layer_cap)?;
    let lp = build_occupation_lp(&chain, model, &bounds, options.with_names)?;
    let sol = solve_lp(&lp)?;
    let mut stats = SolveStats {
        layer_sizes: chain.layer_sizes(),
        lp_variables: lp.num_vars,
        lp_equalities: lp.eq_rows.len(),
        lp_inequalities: lp.ineq_rows.len(),
        pivots: sol.pivots,
        wall_ms: 0.0,
        merge_tolerance: options.merge_tol,
        extraction_gap: None,
    };
    if sol.status != LpStatus::Optimal {
        stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        return Ok(SolveReport {
            mode,
            horizon,
            status: sol.status,
            value: None,
            policy: None,
            feasibility: None,
            epsilon_achieved: None,
            certified_objective: None,
            stats,
        });
    }
    let value = sol.objective_value.unwrap();
    let prefix = extract_policy(&chain, model, &sol)?;
    let policy = extend_ultimately_stationary(prefix, options.tail)?;
    let replayed = eval::rs_cost_finite(model, &policy, model.objective_cost(), horizon)?
        [model.initial_state()];
    stats.extraction_gap = Some((replayed - value).abs());
    let feasibility = check_feasibility(
        model,
        &policy,
        Mode::Original,
        None,
        options.feasibility_tol,
    )?;
    let epsilon_achieved = feasibility.max_violation.map(|v| v.max(0.0));
    let certified = eval::rs_cost_infinite(
        model,
        &policy,
        model.objective_cost(),
        options.certify_tol,
        eval::DEFAULT_CERTIFY_CAP,
    )?;
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(SolveReport {
        mode,
        horizon,
        status: LpStatus::Optimal,
        value: Some(value),
        policy: Some(policy),
        feasibility: Some(feasibility),
        epsilon_achieved,
        certified_objective: Some(certified.at(model.initial_state())),
        stats,
    })
}

/// Independent solves over a horizon range, in parallel under the
/// `parallel` feature; results come back in horizon order.
pub fn solve_sweep(
    model: &MdpModel,
    horizons: std::ops::RangeInclusive<usize>,
    mode: Mode,
    options: &SolveOptions,
) -> Vec<(usize, Result<SolveReport>)> {
    let ts: Vec<usize> = horizons.collect();
    exec::map_collect(&ts, |&t| (t, solve_crsmdp(model, t, mode, options)))
}
