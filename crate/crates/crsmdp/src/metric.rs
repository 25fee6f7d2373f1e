//! The metric on policy space and the Lipschitz constants of the cost
//! functions with respect to it.
//!
//! Rules are compared in the max-absolute-row-sum norm; policies in
//! `sup_t delta^t ||d_t - f_t||` for a fixed `delta in (beta, 1)`. For
//! ultimately stationary policies the supremum is attained within the
//! prefixes or at the first common tail epoch, so it is computed exactly.

use crate::error::Error;
use crate::model::{CostBounds, DecisionRule, MarkovPolicy};
use crate::Result;

/// The geometric weight `delta` of the policy metric.
#[derive(Debug, Clone, Copy)]
pub struct MetricConfig {
    delta: f64,
}

impl MetricConfig {
    /// Requires `beta < delta < 1`.
    pub fn new(beta: f64, delta: f64) -> Result<Self> {
        if !(delta > beta && delta < 1.0) {
            return Err(Error::DimensionMismatch(format!(
                "delta must lie strictly in (beta, 1) = ({beta}, 1), got {delta}"
            )));
        }
        Ok(MetricConfig { delta })
    }

    /// The midpoint default `delta = (1 + beta) / 2`.
    pub fn default_for(beta: f64) -> Self {
        MetricConfig {
            delta: (1.0 + beta) / 2.0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// `||d - f||` in the max-absolute-row-sum norm; lies in [0, 2].
pub fn rule_distance(d: &DecisionRule, f: &DecisionRule) -> Result<f64> {
    if d.num_states() != f.num_states() || d.num_actions() != f.num_actions() {
        return Err(Error::DimensionMismatch(format!(
            "rules are {}x{} and {}x{}",
            d.num_states(),
            d.num_actions(),
            f.num_states(),
            f.num_actions()
        )));
    }
    let diff = d.matrix() - f.matrix();
    let mut worst = 0.0_f64;
    for i in 0..diff.nrows() {
        let row_sum: f64 = diff.row(i).iter().map(|v| v.abs()).sum();
        worst = worst.max(row_sum);
    }
    Ok(worst)
}

/// `sup_t delta^t ||d_t - f_t||`, computed exactly for ultimately
/// stationary policies: beyond both prefixes the per-epoch distance is a
/// decreasing geometric, so the supremum is a finite maximum.
pub fn policy_distance(p1: &MarkovPolicy, p2: &MarkovPolicy, cfg: &MetricConfig) -> Result<f64> {
    let last = p1.prefix_len().max(p2.prefix_len());
    let mut sup = 0.0_f64;
    for t in 0..=last {
        let d = rule_distance(p1.rule_at(t), p2.rule_at(t))?;
        sup = sup.max(cfg.delta.powi(t as i32) * d);
    }
    Ok(sup)
}

/// Lipschitz constant of the standard discounted cost, finite horizon
/// `K (delta^T - beta^T) / (delta^{T-1} (delta - beta))` or infinite
/// horizon `K delta / (delta - beta)`.
pub fn lipschitz_bound_discounted(
    bounds: &CostBounds,
    cfg: &MetricConfig,
    horizon: Option<usize>,
) -> f64 {
    let (k, beta, delta) = (bounds.k, bounds.beta(), cfg.delta);
    match horizon {
        Some(t) => {
            let t = t as i32;
            k * (delta.powi(t) - beta.powi(t)) / (delta.powi(t - 1) * (delta - beta))
        }
        None => k * delta / (delta - beta),
    }
}

/// Lipschitz constant of the finite-horizon risk-sensitive cost:
/// `delta^{-(T-1)} (1 - delta)^{-1} exp(|gamma| K (1 - beta^T))`.
pub fn lipschitz_bound_rs(bounds: &CostBounds, cfg: &MetricConfig, horizon: usize) -> f64 {
    let t = horizon as i32;
    let delta = cfg.delta;
    delta.powi(-(t - 1)) / (1.0 - delta)
        * (bounds.gamma_abs() * bounds.k * (1.0 - bounds.beta().powi(t))).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cost_bound, counterexample_model, MdpModel};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DMatrix};
    use proptest::prelude::*;

    #[test]
    fn rule_distance_cases() {
        let d = DecisionRule::uniform(2, 2);
        assert_eq!(rule_distance(&d, &d).unwrap(), 0.0);
        let a0 = DecisionRule::deterministic(2, 2, 0);
        let a1 = DecisionRule::deterministic(2, 2, 1);
        assert_eq!(rule_distance(&a0, &a1).unwrap(), 2.0);
        assert_eq!(rule_distance(&d, &a0).unwrap(), 1.0);
        assert!(rule_distance(&d, &DecisionRule::uniform(3, 2)).is_err());
    }

    #[test]
    fn policy_distance_cases() {
        let cfg = MetricConfig::new(0.5, 0.75).unwrap();
        let uni = DecisionRule::uniform(1, 2);
        let a0 = DecisionRule::deterministic(1, 2, 0);
        let a1 = DecisionRule::deterministic(1, 2, 1);

        let p = MarkovPolicy::stationary(uni.clone());
        assert_eq!(policy_distance(&p, &p, &cfg).unwrap(), 0.0);

        // Differ only at t = 3 with rule distance 2: 2 * 0.75^3.
        let p1 = MarkovPolicy::new(
            vec![uni.clone(), uni.clone(), uni.clone(), a0.clone()],
            uni.clone(),
        );
        let p2 = MarkovPolicy::new(
            vec![uni.clone(), uni.clone(), uni.clone(), a1.clone()],
            uni.clone(),
        );
        assert_relative_eq!(
            policy_distance(&p1, &p2, &cfg).unwrap(),
            0.84375,
            epsilon = 1e-15
        );

        // Two stationary policies: supremum at t = 0.
        let s0 = MarkovPolicy::stationary(a0);
        let s1 = MarkovPolicy::stationary(a1);
        assert_eq!(policy_distance(&s0, &s1, &cfg).unwrap(), 2.0);
    }

    #[test]
    fn metric_config_bounds_checked() {
        assert!(MetricConfig::new(0.5, 0.5).is_err());
        assert!(MetricConfig::new(0.5, 1.0).is_err());
        assert!(MetricConfig::new(0.5, 0.75).is_ok());
        assert_eq!(MetricConfig::default_for(0.5).delta(), 0.75);
    }

    #[test]
    fn discounted_bound_cases() {
        let model = counterexample_model();
        let bounds = cost_bound(&model); // K = 2, beta = 1/2
        let cfg = MetricConfig::new(0.5, 0.75).unwrap();
        assert_relative_eq!(
            lipschitz_bound_discounted(&bounds, &cfg, Some(1)),
            bounds.k,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            lipschitz_bound_discounted(&bounds, &cfg, None),
            bounds.k * 0.75 / 0.25,
            epsilon = 1e-12
        );
        let zero = MdpModel::new(
            vec![vec![vec![1.0]]],
            DMatrix::zeros(1, 1),
            0.5,
            1.0,
            0,
            vec![],
        )
        .unwrap();
        let zb = cost_bound(&zero);
        assert_eq!(lipschitz_bound_discounted(&zb, &cfg, Some(4)), 0.0);
    }

    #[test]
    fn rs_bound_cases() {
        let model = counterexample_model();
        let bounds = cost_bound(&model); // K = 2, |gamma| = 1, beta = 1/2
        let cfg = MetricConfig::new(0.5, 0.75).unwrap();
        // T = 1: (1 - delta)^{-1} e^{|gamma| C}
        assert_relative_eq!(
            lipschitz_bound_rs(&bounds, &cfg, 1),
            4.0 * 1.0_f64.exp(),
            max_relative = 1e-14
        );
        // T = 3: (4/3)^2 * 4 * e^{2 (1 - 1/8)}
        let expect = (4.0 / 3.0_f64).powi(2) * 4.0 * (1.75_f64).exp();
        assert_relative_eq!(
            lipschitz_bound_rs(&bounds, &cfg, 3),
            expect,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rs_bound_gamma_zero_limit() {
        // With the exponential factor pinned to 1 the constant reduces to
        // delta^{-(T-1)} (1 - delta)^{-1}.
        let model = MdpModel::new(
            vec![vec![vec![1.0], vec![1.0]]],
            dmatrix![1.0, 0.0],
            0.5,
            1e-14,
            0,
            vec![],
        )
        .unwrap();
        let bounds = cost_bound(&model);
        let cfg = MetricConfig::new(0.5, 0.75).unwrap();
        for t in 1..=5 {
            let expect = 0.75_f64.powi(-(t as i32 - 1)) * 4.0;
            assert_relative_eq!(
                lipschitz_bound_rs(&bounds, &cfg, t),
                expect,
                max_relative = 1e-10
            );
        }
    }

    fn arb_rule() -> impl Strategy<Value = DecisionRule> {
        proptest::collection::vec(proptest::collection::vec(0.01..1.0f64, 3), 2).prop_map(|rows| {
            let mut m = DMatrix::zeros(2, 3);
            for (i, row) in rows.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                for (j, v) in row.iter().enumerate() {
                    m[(i, j)] = v / sum;
                }
            }
            DecisionRule::new(m).unwrap()
        })
    }

    fn arb_policy() -> impl Strategy<Value = MarkovPolicy> {
        (proptest::collection::vec(arb_rule(), 0..4), arb_rule())
            .prop_map(|(prefix, tail)| MarkovPolicy::new(prefix, tail))
    }

    proptest! {
        #[test]
        fn metric_axioms(p1 in arb_policy(), p2 in arb_policy(), p3 in arb_policy()) {
            let cfg = MetricConfig::new(0.5, 0.75).unwrap();
            let d12 = policy_distance(&p1, &p2, &cfg).unwrap();
            let d21 = policy_distance(&p2, &p1, &cfg).unwrap();
            prop_assert_eq!(d12, d21);
            prop_assert!(d12 <= 2.0);
            let d13 = policy_distance(&p1, &p3, &cfg).unwrap();
            let d32 = policy_distance(&p3, &p2, &cfg).unwrap();
            prop_assert!(d12 <= d13 + d32 + 1e-12);
            prop_assert_eq!(policy_distance(&p1, &p1, &cfg).unwrap(), 0.0);
        }
    }
}
