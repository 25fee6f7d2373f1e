//! Independent brute-force references.
//!
//! Nothing here shares code with the recursion-based evaluators: path
//! enumeration sums over every trajectory explicitly, the unconstrained
//! solver is a multiplicative dynamic program, and the constrained
//! reference is an exhaustive grid search over Bernoulli rules. All three
//! are exact up to floating point; none of them sample.

use crate::error::Error;
use crate::eval;
use crate::exec;
use crate::model::{DecisionRule, MarkovPolicy, MdpModel};
use crate::truncation::{Mode, TruncatedBounds};
use crate::Result;

/// Hard budget on the number of enumerated trajectories.
pub const ENUMERATION_BUDGET: f64 = 1e6;

/// Budget on grid-search policy combinations.
const GRID_BUDGET: f64 = 5e6;

/// One trajectory with its probability under a policy and its discounted
/// cost under one cost matrix.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub probability: f64,
    pub discounted_cost: f64,
}

fn check_budget(model: &MdpModel, horizon: usize) -> Result<()> {
    let paths = ((model.num_states() * model.num_actions()) as f64).powi(horizon as i32);
    if paths > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudgetExceeded {
            paths,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Enumerates every positive-probability trajectory of length `horizon`
/// from the model's initial state.
pub fn enumerate_trajectories(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &nalgebra::DMatrix<f64>,
    horizon: usize,
) -> Result<Vec<Trajectory>> {
    check_budget(model, horizon)?;
    let mut out = Vec::new();
    let mut states = vec![model.initial_state()];
    let mut actions = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        model: &MdpModel,
        policy: &MarkovPolicy,
        cost: &nalgebra::DMatrix<f64>,
        horizon: usize,
        t: usize,
        prob: f64,
        acc: f64,
        states: &mut Vec<usize>,
        actions: &mut Vec<usize>,
        out: &mut Vec<Trajectory>,
    ) {
        if t == horizon {
            out.push(Trajectory {
                states: states.clone(),
                actions: actions.clone(),
                probability: prob,
                discounted_cost: acc,
            });
            return;
        }
        let s = *states.last().unwrap();
        let rule = policy.rule_at(t);
        for a in 0..model.num_actions() {
            let pa = rule.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            let step_cost = model.beta().powi(t as i32) * cost[(s, a)];
            for (s2, &p) in model.probs(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                states.push(s2);
                actions.push(a);
                recurse(
                    model,
                    policy,
                    cost,
                    horizon,
                    t + 1,
                    prob * pa * p,
                    acc + step_cost,
                    states,
                    actions,
                    out,
                );
                states.pop();
                actions.pop();
            }
        }
    }
    recurse(
        model,
        policy,
        cost,
        horizon,
        0,
        1.0,
        0.0,
        &mut states,
        &mut actions,
        &mut out,
    );
    Ok(out)
}

/// Sums `probability * f(discounted cost)` over all trajectories starting
/// with action `first` at the initial state. Streaming; no allocation.
fn branch_expectation(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &nalgebra::DMatrix<f64>,
    horizon: usize,
    first: usize,
    f: &(impl Fn(f64) -> f64 + Sync),
) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        model: &MdpModel,
        policy: &MarkovPolicy,
        cost: &nalgebra::DMatrix<f64>,
        horizon: usize,
        t: usize,
        s: usize,
        prob: f64,
        acc: f64,
        forced: Option<usize>,
        f: &(impl Fn(f64) -> f64 + Sync),
    ) -> f64 {
        if t == horizon {
            return prob * f(acc);
        }
        let rule = policy.rule_at(t);
        let mut total = 0.0;
        let action_range: Vec<usize> = match forced {
            Some(a) => vec![a],
            None => (0..model.num_actions()).collect(),
        };
        for a in action_range {
            let pa = rule.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            let step_cost = model.beta().powi(t as i32) * cost[(s, a)];
            for (s2, &p) in model.probs(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                total += recurse(
                    model,
                    policy,
                    cost,
                    horizon,
                    t + 1,
                    s2,
                    prob * pa * p,
                    acc + step_cost,
                    None,
                    f,
                );
            }
        }
        total
    }
    recurse(
        model,
        policy,
        cost,
        horizon,
        0,
        model.initial_state(),
        1.0,
        0.0,
        Some(first),
        f,
    )
}

fn enumerate_expectation(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &nalgebra::DMatrix<f64>,
    horizon: usize,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<f64> {
    check_budget(model, horizon)?;
    // Sharded by first action; partial sums folded in fixed action order
    // so the result is bit-stable regardless of scheduling.
    let partials = exec::map_range(0..model.num_actions(), |a| {
        branch_expectation(model, policy, cost, horizon, a, &f)
    });
    Ok(partials.into_iter().sum())
}

/// Exact `E[exp(gamma * discounted cost)]` by full path enumeration.
pub fn enumerate_paths_rs_cost(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &nalgebra::DMatrix<f64>,
    horizon: usize,
) -> Result<f64> {
    let gamma = model.gamma();
    enumerate_expectation(model, policy, cost, horizon, move |c| (gamma * c).exp())
}

/// Exact `E[discounted cost]` by full path enumeration.
pub fn enumerate_paths_discounted(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &nalgebra::DMatrix<f64>,
    horizon: usize,
) -> Result<f64> {
    enumerate_expectation(model, policy, cost, horizon, |c| c)
}

/// Multiplicative dynamic program for the unconstrained finite-horizon
/// risk-sensitive problem: `V_T = 1`,
/// `V_t(s) = min_a exp(gamma beta^t R(s,a)) sum_{s'} p(s'|s,a) V_{t+1}(s')`.
/// Ties break toward the lowest action index. Returns the value at the
/// initial state and the minimizing deterministic rules.
pub fn dp_unconstrained_rs(model: &MdpModel, horizon: usize) -> Result<(f64, Vec<DecisionRule>)> {
    let (m, n) = (model.num_states(), model.num_actions());
    let gamma = model.gamma();
    let beta = model.beta();
    let cost = model.objective_cost();
    let c_local = cost.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if gamma.abs() * c_local / (1.0 - beta) > crate::model::MAX_EXPONENT {
        return Err(Error::RiskScaleTooLarge(
            gamma.abs() * c_local / (1.0 - beta),
        ));
    }
    let mut value = vec![1.0_f64; m];
    let mut rules: Vec<DecisionRule> = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let scale = gamma * beta.powi(t as i32);
        let mut next = vec![f64::INFINITY; m];
        let mut actions = vec![0usize; m];
        for s in 0..m {
            for a in 0..n {
                let expectation: f64 = model
                    .probs(s, a)
                    .iter()
                    .zip(value.iter())
                    .map(|(p, v)| p * v)
                    .sum();
                let q = (scale * cost[(s, a)]).exp() * expectation;
                if q < next[s] {
                    next[s] = q;
                    actions[s] = a;
                }
            }
        }
        rules.push(DecisionRule::deterministic_per_state(n, &actions));
        value = next;
    }
    rules.reverse();
    Ok((value[model.initial_state()], rules))
}

/// Exhaustive grid search over Bernoulli action rules for tiny constrained
/// instances (n = 2, m <= 2, horizon <= 3). Every rule row is `(q, 1-q)`
/// with `q` on a uniform grid of `resolution` points; feasibility is
/// checked against the same truncated bounds the LP would use.
pub fn grid_search_constrained(
    model: &MdpModel,
    horizon: usize,
    mode: Mode,
    resolution: usize,
) -> Result<(f64, MarkovPolicy)> {
    let (m, n) = (model.num_states(), model.num_actions());
    if n != 2 || m > 2 || horizon > 3 || horizon == 0 {
        return Err(Error::InstanceTooLarge(format!(
            "grid search covers n = 2, m <= 2, 1 <= T <= 3; got m = {m}, n = {n}, T = {horizon}"
        )));
    }
    if resolution < 2 {
        return Err(Error::InstanceTooLarge(
            "resolution must be at least 2".into(),
        ));
    }
    let params = horizon * m;
    let combos = (resolution as f64).powi(params as i32);
    if combos > GRID_BUDGET {
        return Err(Error::InstanceTooLarge(format!(
            "{combos:.3e} grid combinations exceed budget {GRID_BUDGET:.1e}"
        )));
    }
    let bounds = TruncatedBounds::new(model, mode, Some(horizon))?;
    let grid: Vec<f64> = (0..resolution)
        .map(|i| i as f64 / (resolution - 1) as f64)
        .collect();

    let mut best: Option<(f64, MarkovPolicy)> = None;
    let mut index = vec![0usize; params];
    loop {
        let mut prefix = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mut mat = nalgebra::DMatrix::zeros(m, 2);
            for s in 0..m {
                let q = grid[index[t * m + s]];
                mat[(s, 0)] = q;
                mat[(s, 1)] = 1.0 - q;
            }
            prefix.push(DecisionRule::new(mat)?);
        }
        let policy = MarkovPolicy::new(prefix, DecisionRule::uniform(m, 2));

        let mut feasible = true;
        for eff in bounds.effective() {
            let h = eff
                .horizon
                .expect("truncated bounds are all finite-horizon");
            let spec = &model.constraints()[eff.index];
            let achieved = if eff.kind.is_rs() {
                eval::rs_cost_finite(model, &policy, &spec.cost, h)?[model.initial_state()]
            } else {
                eval::discounted_cost_finite(model, &policy, &spec.cost, h)?[model.initial_state()]
            };
            if achieved > eff.bound + 1e-12 {
                feasible = false;
                break;
            }
        }
        if feasible {
            let value = eval::rs_cost_finite(model, &policy, model.objective_cost(), horizon)?
                [model.initial_state()];
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, policy));
            }
        }

        // advance the multi-index
        let mut pos = 0;
        loop {
            if pos == params {
                return best.ok_or(Error::NoFeasibleGridPoint);
            }
            index[pos] += 1;
            if index[pos] < resolution {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}
