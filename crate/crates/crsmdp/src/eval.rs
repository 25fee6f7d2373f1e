//! Exact policy evaluation.
//!
//! Standard discounted costs use the matrix recursion
//! `v_t = beta^t R_{d_t} + P_{d_t} v_{t+1}`; the infinite-horizon value of
//! an ultimately stationary policy solves `(I - beta P) w = R_d` for the
//! tail and rolls the prefix backward. Risk-sensitive costs use the
//! multiplicative backward recursion on state-action value matrices
//! (`Q_{T-1} = exp(. gamma beta^{T-1} R)`, then
//! `Q_{t-1}(s,a) = exp(gamma beta^{t-1} R(s,a)) p(.|s,a)' (d_t . Q_t) 1`).
//! Infinite-horizon risk-sensitive values are returned as certified
//! intervals from the two-sided ratio bound `J/J_T in [1/K_T, K_T]`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Error;
use crate::model::{CostBounds, DecisionRule, MarkovPolicy, MdpModel, MAX_EXPONENT};
use crate::Result;

/// Default search cap for the certified-interval horizon.
pub const DEFAULT_CERTIFY_CAP: usize = 10_000;

/// Per-epoch risk-sensitive state-action value matrices for a fixed
/// policy and horizon; `matrices[t]` holds `Q_t` (all entries positive).
#[derive(Debug, Clone)]
pub struct QFactors {
    pub horizon: usize,
    pub matrices: Vec<DMatrix<f64>>,
}

/// A value together with a guaranteed enclosure radius:
/// `|true - value| <= radius`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertifiedValue {
    pub value: f64,
    pub radius: f64,
    pub horizon_used: usize,
}

/// Certified values for every initial state at once.
#[derive(Debug, Clone)]
pub struct CertifiedVector {
    pub values: DVector<f64>,
    pub radii: DVector<f64>,
    pub horizon_used: usize,
}

impl CertifiedVector {
    pub fn at(&self, state: usize) -> CertifiedValue {
        CertifiedValue {
            value: self.values[state],
            radius: self.radii[state],
            horizon_used: self.horizon_used,
        }
    }

    pub fn upper(&self, state: usize) -> f64 {
        self.values[state] + self.radii[state]
    }

    pub fn lower(&self, state: usize) -> f64 {
        self.values[state] - self.radii[state]
    }
}

fn check_dims(model: &MdpModel, cost: &DMatrix<f64>, policy: &MarkovPolicy) -> Result<()> {
    let (m, n) = (model.num_states(), model.num_actions());
    if cost.nrows() != m || cost.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix is {}x{}, model is {m}x{n}",
            cost.nrows(),
            cost.ncols()
        )));
    }
    if policy.num_states() != m || policy.num_actions() != n {
        return Err(Error::DimensionMismatch(format!(
            "policy rules are {}x{}, model is {m}x{n}",
            policy.num_states(),
            policy.num_actions()
        )));
    }
    Ok(())
}

/// `R_d = (R . d) 1`: per-state expected immediate cost under a rule.
pub fn expected_cost_vector(rule: &DecisionRule, cost: &DMatrix<f64>) -> DVector<f64> {
    let weighted = cost.component_mul(rule.matrix());
    DVector::from_iterator(cost.nrows(), weighted.row_iter().map(|r| r.sum()))
}

/// `(P_d)_{ij} = sum_a p(s_j|s_i,a) d(a|s_i)`: the chain induced by a rule.
pub fn transition_matrix(model: &MdpModel, rule: &DecisionRule) -> DMatrix<f64> {
    let m = model.num_states();
    DMatrix::from_fn(m, m, |i, j| {
        (0..model.num_actions())
            .map(|a| model.probs(i, a)[j] * rule.prob(i, a))
            .sum()
    })
}

/// Finite-horizon standard discounted cost vector `L_T` (component at the
/// model's initial state is the scalar value).
pub fn discounted_cost_finite(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &DMatrix<f64>,
    horizon: usize,
) -> Result<DVector<f64>> {
    check_dims(model, cost, policy)?;
    let mut v = DVector::zeros(model.num_states());
    for t in (0..horizon).rev() {
        let rule = policy.rule_at(t);
        let r_d = expected_cost_vector(rule, cost);
        let p_d = transition_matrix(model, rule);
        v = r_d * model.beta().powi(t as i32) + p_d * v;
    }
    Ok(v)
}

/// Exact infinite-horizon standard discounted cost vector of an
/// ultimately stationary policy: direct linear solve on the stationary
/// tail, prefix rolled backward.
pub fn discounted_cost_infinite(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    check_dims(model, cost, policy)?;
    let m = model.num_states();
    let beta = model.beta();
    let r_tail = expected_cost_vector(&policy.tail, cost);
    let p_tail = transition_matrix(model, &policy.tail);
    let system = DMatrix::identity(m, m) - &p_tail * beta;
    let w = system
        .clone()
        .lu()
        .solve(&r_tail)
        .ok_or_else(|| Error::Internal("singular (I - beta P) system".into()))?;
    let residual = (&system * &w - &r_tail).amax();
    if residual > 1e-9 {
        return Err(Error::Internal(format!(
            "tail linear solve residual {residual:e} exceeds 1e-9"
        )));
    }
    let prefix_len = policy.prefix_len();
    // Tail value enters at epoch prefix_len with weight beta^prefix_len.
    let mut v = w * beta.powi(prefix_len as i32);
    for t in (0..prefix_len).rev() {
        let rule = policy.rule_at(t);
        let r_d = expected_cost_vector(rule, cost);
        let p_d = transition_matrix(model, rule);
        v = r_d * beta.powi(t as i32) + p_d * v;
    }
    Ok(v)
}

fn guard_risk_scale(model: &MdpModel, cost: &DMatrix<f64>) -> Result<f64> {
    let c_local = cost.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let k_local = c_local / (1.0 - model.beta());
    let scale = model.gamma().abs() * k_local;
    if scale > MAX_EXPONENT {
        return Err(Error::RiskScaleTooLarge(scale));
    }
    Ok(k_local)
}

/// Backward recursion for the risk-sensitive state-action value matrices.
pub fn rs_q_factors(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &DMatrix<f64>,
    horizon: usize,
) -> Result<QFactors> {
    check_dims(model, cost, policy)?;
    guard_risk_scale(model, cost)?;
    let (m, n) = (model.num_states(), model.num_actions());
    let gamma = model.gamma();
    let beta = model.beta();
    let mut matrices = vec![DMatrix::zeros(0, 0); horizon];
    matrices[horizon - 1] = cost.map(|c| (gamma * beta.powi(horizon as i32 - 1) * c).exp());
    for t in (1..horizon).rev() {
        let rule = policy.rule_at(t);
        // w(s) = sum_a d_t(a|s) Q_t(s,a)
        let weighted = matrices[t].component_mul(rule.matrix());
        let w = DVector::from_iterator(m, weighted.row_iter().map(|r| r.sum()));
        let scale = gamma * beta.powi(t as i32 - 1);
        matrices[t - 1] = DMatrix::from_fn(m, n, |s, a| {
            let expectation: f64 = model
                .probs(s, a)
                .iter()
                .zip(w.iter())
                .map(|(p, wv)| p * wv)
                .sum();
            (scale * cost[(s, a)]).exp() * expectation
        });
    }
    Ok(QFactors { horizon, matrices })
}

/// Finite-horizon risk-sensitive cost vector `J_T = (d_0 . Q_0) 1`.
pub fn rs_cost_finite(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &DMatrix<f64>,
    horizon: usize,
) -> Result<DVector<f64>> {
    let q = rs_q_factors(model, policy, cost, horizon)?;
    Ok(expected_cost_vector(policy.rule_at(0), &q.matrices[0]))
}

/// Infinite-horizon risk-sensitive cost as a certified interval.
///
/// Picks the smallest horizon T with
/// `exp(|gamma| K (1 - beta^T)) (K_T - 1) <= tol` (K derived from this
/// cost matrix alone), evaluates `J_T`, and returns radius
/// `J_T (K_T - 1)`, valid since `J in [J_T / K_T, J_T K_T]`.
pub fn rs_cost_infinite(
    model: &MdpModel,
    policy: &MarkovPolicy,
    cost: &DMatrix<f64>,
    tol: f64,
    cap: usize,
) -> Result<CertifiedVector> {
    check_dims(model, cost, policy)?;
    let k_local = guard_risk_scale(model, cost)?;
    let gamma_abs = model.gamma().abs();
    let beta = model.beta();
    let mut horizon = None;
    for t in 1..=cap {
        let tail = gamma_abs * k_local * beta.powi(t as i32);
        let bound = (gamma_abs * k_local * (1.0 - beta.powi(t as i32))).exp() * tail.exp_m1();
        if bound <= tol / 2.0 {
            horizon = Some(t);
            break;
        }
    }
    let horizon = horizon.ok_or(Error::ToleranceUnreachable { cap })?;
    let values = rs_cost_finite(model, policy, cost, horizon)?;
    let k_t_minus_one = (gamma_abs * k_local * beta.powi(horizon as i32)).exp_m1();
    // The enclosure can be attained with equality (a deterministic path
    // accruing the maximal cost every step), and the recursion itself
    // rounds; pad relative to the value so the interval stays valid in
    // floating point. A zero cost keeps its exact zero radius.
    let radii = values.map(|v| {
        if k_t_minus_one == 0.0 {
            0.0
        } else {
            v * k_t_minus_one + v.abs() * 1e-13
        }
    });
    Ok(CertifiedVector {
        values,
        radii,
        horizon_used: horizon,
    })
}

/// Batch finite-horizon risk-sensitive evaluation over many policies
/// (data-parallel under the `parallel` feature).
pub fn rs_cost_finite_batch(
    model: &MdpModel,
    policies: &[MarkovPolicy],
    cost: &DMatrix<f64>,
    horizon: usize,
) -> Vec<Result<DVector<f64>>> {
    crate::exec::map_collect(policies, |p| rs_cost_finite(model, p, cost, horizon))
}

/// Batch finite-horizon discounted evaluation over many policies.
pub fn discounted_cost_finite_batch(
    model: &MdpModel,
    policies: &[MarkovPolicy],
    cost: &DMatrix<f64>,
    horizon: usize,
) -> Vec<Result<DVector<f64>>> {
    crate::exec::map_collect(policies, |p| {
        discounted_cost_finite(model, p, cost, horizon)
    })
}

/// Verifies the entrywise enclosure
/// `exp(-|gamma| K (beta^t - beta^T)) <= Q_t <= exp(|gamma| K (beta^t - beta^T))`
/// for every layer, with K taken from `bounds`.
pub fn q_factors_within_bounds(q: &QFactors, bounds: &CostBounds) -> bool {
    let gamma_k = bounds.gamma_abs() * bounds.k;
    let beta = bounds.beta();
    q.matrices.iter().enumerate().all(|(t, mat)| {
        let width = gamma_k * (beta.powi(t as i32) - beta.powi(q.horizon as i32));
        let (lo, hi) = ((-width).exp(), width.exp());
        mat.iter()
            .all(|&v| v > 0.0 && v >= lo - 1e-12 && v <= hi + 1e-12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cost_bound, counterexample_model, uniform_rule, MarkovPolicy};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn single_state_two_action_model() -> MdpModel {
        MdpModel::new(
            vec![vec![vec![1.0], vec![1.0]]],
            dmatrix![1.0, 0.0],
            0.5,
            1.0,
            0,
            vec![],
        )
        .unwrap()
    }

    fn two_state_model() -> MdpModel {
        MdpModel::new(
            vec![
                vec![vec![0.7, 0.3], vec![0.2, 0.8]],
                vec![vec![0.4, 0.6], vec![0.9, 0.1]],
            ],
            dmatrix![0.3, 0.9; 0.5, 0.1],
            0.5,
            0.8,
            0,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn expected_cost_vector_cases() {
        let model = counterexample_model();
        let phi = uniform_rule(&model);
        let c1 = &model.constraints()[0].cost;
        let r_phi = expected_cost_vector(&phi, c1);
        assert_eq!(r_phi[0], 0.5);

        let zero = DMatrix::zeros(1, 2);
        assert_eq!(expected_cost_vector(&phi, &zero)[0], 0.0);

        let det = DecisionRule::deterministic(1, 2, 1);
        assert_eq!(expected_cost_vector(&det, c1)[0], c1[(0, 1)]);
    }

    #[test]
    fn transition_matrix_cases() {
        let model = counterexample_model();
        let p = transition_matrix(&model, &uniform_rule(&model));
        assert_eq!(p[(0, 0)], 1.0);

        let model2 = two_state_model();
        let det = DecisionRule::deterministic(2, 2, 1);
        let p2 = transition_matrix(&model2, &det);
        assert_eq!(p2[(0, 0)], 0.2);
        assert_eq!(p2[(1, 0)], 0.9);

        // uniform rule averages the two per-action kernels row-wise
        let punif = transition_matrix(&model2, &uniform_rule(&model2));
        for i in 0..2 {
            for j in 0..2 {
                let expect = 0.5 * (model2.probs(i, 0)[j] + model2.probs(i, 1)[j]);
                assert_relative_eq!(punif[(i, j)], expect, max_relative = 1e-15);
            }
            let row_sum: f64 = (0..2).map(|j| punif[(i, j)]).sum();
            assert!((row_sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn counterexample_discounted_identity() {
        // Summed over the two constraint costs the finite value is
        // 2 - (1/2)^{T-1} for every policy.
        let model = counterexample_model();
        let policies = [
            MarkovPolicy::stationary(uniform_rule(&model)),
            MarkovPolicy::stationary(DecisionRule::deterministic(1, 2, 0)),
            MarkovPolicy::new(
                vec![
                    DecisionRule::deterministic(1, 2, 1),
                    DecisionRule::uniform(1, 2),
                ],
                DecisionRule::deterministic(1, 2, 0),
            ),
        ];
        for policy in &policies {
            for t in 1..=8 {
                let v1 = discounted_cost_finite(&model, policy, &model.constraints()[0].cost, t)
                    .unwrap();
                let v2 = discounted_cost_finite(&model, policy, &model.constraints()[1].cost, t)
                    .unwrap();
                let expect = 2.0 - 0.5_f64.powi(t as i32 - 1);
                assert_relative_eq!(v1[0] + v2[0], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn discounted_zero_cost_is_zero() {
        let model = two_state_model();
        let policy = MarkovPolicy::stationary(uniform_rule(&model));
        let v = discounted_cost_finite(&model, &policy, &DMatrix::zeros(2, 2), 5).unwrap();
        assert_eq!(v.amax(), 0.0);
    }

    #[test]
    fn infinite_discounted_on_counterexample() {
        let model = counterexample_model();
        let phi = MarkovPolicy::stationary(uniform_rule(&model));
        for spec in model.constraints() {
            let v = discounted_cost_infinite(&model, &phi, &spec.cost).unwrap();
            assert_relative_eq!(v[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn infinite_discounted_constant_cost() {
        let model = two_state_model();
        let policy = MarkovPolicy::stationary(DecisionRule::deterministic(2, 2, 0));
        let c = DMatrix::from_element(2, 2, 0.7);
        let v = discounted_cost_infinite(&model, &policy, &c).unwrap();
        for s in 0..2 {
            assert_relative_eq!(v[s], 0.7 / (1.0 - model.beta()), epsilon = 1e-12);
        }
    }

    #[test]
    fn finite_tail_bound_toward_infinite() {
        // |L_T - L_inf| <= K beta^T with K from the evaluated cost.
        let model = two_state_model();
        let policy = MarkovPolicy::new(
            vec![DecisionRule::deterministic(2, 2, 1)],
            DecisionRule::uniform(2, 2),
        );
        let cost = model.objective_cost().clone();
        let c = cost.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let k = c / (1.0 - model.beta());
        let vinf = discounted_cost_infinite(&model, &policy, &cost).unwrap();
        for t in 1..=20 {
            let vt = discounted_cost_finite(&model, &policy, &cost, t).unwrap();
            let gap = (&vinf - &vt).amax();
            assert!(gap <= k * model.beta().powi(t as i32) + 1e-12);
        }
    }

    #[test]
    fn q_factors_zero_cost_all_ones() {
        let model = two_state_model();
        let policy = MarkovPolicy::stationary(uniform_rule(&model));
        let q = rs_q_factors(&model, &policy, &DMatrix::zeros(2, 2), 4).unwrap();
        for mat in &q.matrices {
            for v in mat.iter() {
                assert_relative_eq!(*v, 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn q_factors_single_state_example() {
        // One state, always a0, cost(s,a0)=1, cost(s,a1)=0, beta=1/2, gamma=1, T=2:
        // Q_1 = (e^{1/2}, 1) and Q_0(s,a0) = e * e^{1/2} = e^{3/2}.
        let model = single_state_two_action_model();
        let policy = MarkovPolicy::stationary(DecisionRule::deterministic(1, 2, 0));
        let q = rs_q_factors(&model, &policy, model.objective_cost(), 2).unwrap();
        assert_relative_eq!(q.matrices[1][(0, 0)], 0.5_f64.exp(), max_relative = 1e-15);
        assert_relative_eq!(q.matrices[1][(0, 1)], 1.0, max_relative = 1e-15);
        assert_relative_eq!(q.matrices[0][(0, 0)], 1.5_f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn rs_cost_finite_single_path() {
        let model = single_state_two_action_model();
        let policy = MarkovPolicy::stationary(DecisionRule::deterministic(1, 2, 0));
        let j = rs_cost_finite(&model, &policy, model.objective_cost(), 2).unwrap();
        assert_relative_eq!(j[0], 1.5_f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn rs_cost_zero_cost_is_one() {
        let model = two_state_model();
        let policy = MarkovPolicy::stationary(uniform_rule(&model));
        let j = rs_cost_finite(&model, &policy, &DMatrix::zeros(2, 2), 3).unwrap();
        for s in 0..2 {
            assert_relative_eq!(j[s], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn q_factor_enclosure_holds() {
        let model = two_state_model();
        let policy = MarkovPolicy::new(
            vec![
                DecisionRule::uniform(2, 2),
                DecisionRule::deterministic(2, 2, 0),
            ],
            DecisionRule::deterministic(2, 2, 1),
        );
        let bounds = cost_bound(&model);
        let q = rs_q_factors(&model, &policy, model.objective_cost(), 6).unwrap();
        assert!(q_factors_within_bounds(&q, &bounds));
        // and the horizon-0 layer obeys J_T in [e^{-|g|K(1-b^T)}, e^{|g|K(1-b^T)}]
        let j = rs_cost_finite(&model, &policy, model.objective_cost(), 6).unwrap();
        let width = bounds.gamma_abs() * bounds.k * (1.0 - model.beta().powi(6));
        for s in 0..2 {
            assert!(j[s] >= (-width).exp() - 1e-12 && j[s] <= width.exp() + 1e-12);
        }
    }

    #[test]
    fn rs_infinite_certified_interval() {
        // Geometric path: J = exp(gamma/(1-beta)) = e^2.
        let model = single_state_two_action_model();
        let policy = MarkovPolicy::stationary(DecisionRule::deterministic(1, 2, 0));
        let cert = rs_cost_infinite(
            &model,
            &policy,
            model.objective_cost(),
            1e-6,
            DEFAULT_CERTIFY_CAP,
        )
        .unwrap();
        let truth = 2.0_f64.exp();
        assert!(cert.lower(0) <= truth && truth <= cert.upper(0));
        assert!(cert.radii[0] <= 1e-6);
    }

    #[test]
    fn rs_infinite_zero_cost() {
        let model = two_state_model();
        let policy = MarkovPolicy::stationary(uniform_rule(&model));
        let cert = rs_cost_infinite(
            &model,
            &policy,
            &DMatrix::zeros(2, 2),
            1e-9,
            DEFAULT_CERTIFY_CAP,
        )
        .unwrap();
        assert_eq!(cert.horizon_used, 1);
        assert_eq!(cert.values[0], 1.0);
        assert_eq!(cert.radii[0], 0.0);
    }

    #[test]
    fn rs_infinite_matches_long_recursion() {
        let model = counterexample_model();
        let phi = MarkovPolicy::stationary(uniform_rule(&model));
        let c1 = model.constraints()[0].cost.clone();
        let cert = rs_cost_infinite(&model, &phi, &c1, 1e-8, DEFAULT_CERTIFY_CAP).unwrap();
        let long = rs_cost_finite(&model, &phi, &c1, 60).unwrap();
        assert!((cert.values[0] - long[0]).abs() <= cert.radii[0] + 1e-10);
    }

    #[test]
    fn one_step_drift_and_ratio_bounds() {
        let model = two_state_model();
        let policy = MarkovPolicy::new(
            vec![DecisionRule::uniform(2, 2)],
            DecisionRule::deterministic(2, 2, 0),
        );
        let cost = model.objective_cost().clone();
        let c = cost.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let g = model.gamma().abs();
        for t in 1..=15 {
            let lt = discounted_cost_finite(&model, &policy, &cost, t).unwrap();
            let lt1 = discounted_cost_finite(&model, &policy, &cost, t + 1).unwrap();
            assert!((&lt1 - &lt).amax() <= c * model.beta().powi(t as i32) + 1e-13);
            let jt = rs_cost_finite(&model, &policy, &cost, t).unwrap();
            let jt1 = rs_cost_finite(&model, &policy, &cost, t + 1).unwrap();
            let bound = (g * c * model.beta().powi(t as i32)).exp();
            for s in 0..2 {
                let ratio = jt1[s] / jt[s];
                assert!(ratio <= bound * (1.0 + 1e-12) && ratio >= (1.0 / bound) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn rs_monotone_in_cost_follows_risk_sign() {
        let model = two_state_model();
        let policy = MarkovPolicy::stationary(uniform_rule(&model));
        let lo = model.objective_cost().clone();
        let hi = lo.map(|v| v + 0.3);
        for t in 1..=6 {
            let jl = rs_cost_finite(&model, &policy, &lo, t).unwrap();
            let jh = rs_cost_finite(&model, &policy, &hi, t).unwrap();
            for s in 0..2 {
                assert!(
                    jl[s] <= jh[s] + 1e-14,
                    "gamma > 0: larger costs mean larger utility"
                );
            }
        }
        // flipped risk factor reverses the ordering
        let negated = MdpModel::new(
            model.transitions().clone(),
            model.objective_cost().clone(),
            model.beta(),
            -model.gamma(),
            model.initial_state(),
            vec![],
        )
        .unwrap();
        for t in 1..=6 {
            let jl = rs_cost_finite(&negated, &policy, &lo, t).unwrap();
            let jh = rs_cost_finite(&negated, &policy, &hi, t).unwrap();
            for s in 0..2 {
                assert!(
                    jl[s] >= jh[s] - 1e-14,
                    "gamma < 0: larger costs mean smaller utility"
                );
            }
        }
    }

    #[test]
    fn rs_ratio_to_limit_within_enclosure() {
        // J_inf / J_T in [1/K_T, K_T], with a long recursion standing in
        // for the limit.
        let model = two_state_model();
        let policy = MarkovPolicy::new(
            vec![DecisionRule::uniform(2, 2)],
            DecisionRule::deterministic(2, 2, 0),
        );
        let cost = model.objective_cost().clone();
        let c = cost.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let k = c / (1.0 - model.beta());
        let g = model.gamma().abs();
        let surrogate = rs_cost_finite(&model, &policy, &cost, 60).unwrap();
        for t in 1..=10 {
            let jt = rs_cost_finite(&model, &policy, &cost, t).unwrap();
            let k_t = (g * k * model.beta().powi(t as i32)).exp();
            for s in 0..2 {
                let ratio = surrogate[s] / jt[s];
                assert!(ratio <= k_t * (1.0 + 1e-12) && ratio * k_t >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn risk_scale_guard_trips() {
        let model = MdpModel::new(
            vec![vec![vec![1.0]]],
            DMatrix::from_element(1, 1, 800.0),
            0.5,
            1.0,
            0,
            vec![],
        )
        .unwrap();
        let policy = MarkovPolicy::stationary(DecisionRule::uniform(1, 1));
        let err = rs_cost_finite(&model, &policy, model.objective_cost(), 3);
        assert!(matches!(err, Err(Error::RiskScaleTooLarge(_))));
    }
}
