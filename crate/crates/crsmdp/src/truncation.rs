//! Perturbed constraint bounds for the inner and outer finite-horizon
//! approximations, feasibility verdicts, the maximum-violation map, and
//! the horizon sufficient for a target epsilon.
//!
//! At horizon T the infinite-horizon constraints are replaced by their
//! T-truncated costs with bounds tightened (`b - K beta^T`, `b_hat / K_T`)
//! for the inner problem or loosened (`b + K beta^T`, `b_hat K_T`) for the
//! outer one; finite-horizon constraints keep their own horizons and
//! bounds. Inner-feasible policies are feasible for the original problem;
//! original-feasible policies are outer-feasible at every horizon.
//!
//! The inner approximation comes with a caveat: its feasible set can be
//! empty at every horizon even when the original problem is feasible (see
//! [`crate::model::counterexample_model`]). Whether that happens hinges on
//! a global property of the maximum-violation map `h` (zero must not be a
//! locally minimal value) that no algorithm checks here; when in doubt,
//! use [`Mode::Upper`], whose eps-feasibility guarantee is unconditional.

use serde::Serialize;

use crate::error::Error;
use crate::eval;
use crate::model::{cost_bound, ConstraintKind, MarkovPolicy, MdpModel};
use crate::Result;

/// Default absolute tolerance on constraint slack.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Default cap on the horizon search in [`horizon_for_epsilon`].
pub const DEFAULT_HORIZON_CAP: usize = 10_000;

/// Which problem the bounds describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Inner approximation: tightened bounds, truncated costs.
    Lower,
    /// Outer approximation: loosened bounds, truncated costs.
    Upper,
    /// The original problem: untouched bounds, exact horizons.
    Original,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Lower => f.write_str("lower"),
            Mode::Upper => f.write_str("upper"),
            Mode::Original => f.write_str("original"),
        }
    }
}

/// One constraint's effective bound and evaluation horizon under a mode.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveConstraint {
    /// Index into `model.constraints()`.
    pub index: usize,
    pub kind: ConstraintKind,
    pub bound: f64,
    /// `None` means evaluate at infinite horizon (Original mode only).
    pub horizon: Option<usize>,
}

/// Effective bounds of every constraint under one mode and horizon.
#[derive(Debug, Clone, Serialize)]
pub struct TruncatedBounds {
    pub mode: Mode,
    pub horizon: Option<usize>,
    effective: Vec<EffectiveConstraint>,
}

impl TruncatedBounds {
    /// For `Lower`/`Upper` a horizon `T >= 1` is required and must be at
    /// least every finite-constraint horizon; `Original` takes none.
    pub fn new(model: &MdpModel, mode: Mode, horizon: Option<usize>) -> Result<Self> {
        Self::with_bounds(model, mode, horizon, &cost_bound(model))
    }

    /// As [`TruncatedBounds::new`] with caller-supplied cost bounds (for
    /// reproducing looser published constants).
    pub fn with_bounds(
        model: &MdpModel,
        mode: Mode,
        horizon: Option<usize>,
        bounds: &crate::model::CostBounds,
    ) -> Result<Self> {
        let horizon = match mode {
            Mode::Original => None,
            Mode::Lower | Mode::Upper => {
                let t = horizon.ok_or_else(|| {
                    Error::DimensionMismatch(format!("mode {mode} requires a horizon"))
                })?;
                if t == 0 {
                    return Err(Error::DimensionMismatch(
                        "horizon must be a positive integer".into(),
                    ));
                }
                for (i, c) in model.constraints().iter().enumerate() {
                    if let Some(own) = c.horizon {
                        if t < own {
                            return Err(Error::HorizonBelowFiniteConstraint {
                                horizon: t,
                                required: own,
                                constraint: i,
                            });
                        }
                    }
                }
                Some(t)
            }
        };
        let effective = model
            .constraints()
            .iter()
            .enumerate()
            .map(|(index, c)| {
                let (bound, eff_horizon) = match (c.kind, mode) {
                    (ConstraintKind::DiscountedInfinite, Mode::Lower) => {
                        let t = horizon.unwrap();
                        (c.bound - bounds.k * model.beta().powi(t as i32), Some(t))
                    }
                    (ConstraintKind::DiscountedInfinite, Mode::Upper) => {
                        let t = horizon.unwrap();
                        (c.bound + bounds.k * model.beta().powi(t as i32), Some(t))
                    }
                    (ConstraintKind::DiscountedInfinite, Mode::Original) => (c.bound, None),
                    (ConstraintKind::RsInfinite, Mode::Lower) => {
                        let t = horizon.unwrap();
                        (c.bound / bounds.k_t(t), Some(t))
                    }
                    (ConstraintKind::RsInfinite, Mode::Upper) => {
                        let t = horizon.unwrap();
                        (c.bound * bounds.k_t(t), Some(t))
                    }
                    (ConstraintKind::RsInfinite, Mode::Original) => (c.bound, None),
                    (ConstraintKind::DiscountedFinite | ConstraintKind::RsFinite, _) => {
                        (c.bound, c.horizon)
                    }
                };
                EffectiveConstraint {
                    index,
                    kind: c.kind,
                    bound,
                    horizon: eff_horizon,
                }
            })
            .collect();
        Ok(TruncatedBounds {
            mode,
            horizon,
            effective,
        })
    }

    pub fn effective(&self) -> &[EffectiveConstraint] {
        &self.effective
    }
}

/// Feasibility of one policy against a set of effective bounds.
/// `slacks[i] = bound_i - achieved_i`; negative slack is violation.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub slacks: Vec<f64>,
    /// `-min(slack)`; `None` when there are no constraints.
    pub max_violation: Option<f64>,
    /// Certification radius folded into infinite-horizon risk-sensitive
    /// evaluations (zero when none are involved).
    pub uncertainty: f64,
}

/// The maximum-violation map `h` and its evaluation uncertainty.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ViolationReport {
    pub h: f64,
    pub uncertainty: f64,
}

fn achieved_value(
    model: &MdpModel,
    policy: &MarkovPolicy,
    eff: &EffectiveConstraint,
    rs_tol: f64,
) -> Result<(f64, f64)> {
    let spec = &model.constraints()[eff.index];
    match (eff.kind.is_rs(), eff.horizon) {
        (false, Some(t)) => Ok((
            eval::discounted_cost_finite(model, policy, &spec.cost, t)?[model.initial_state()],
            0.0,
        )),
        (false, None) => Ok((
            eval::discounted_cost_infinite(model, policy, &spec.cost)?[model.initial_state()],
            0.0,
        )),
        (true, Some(t)) => Ok((
            eval::rs_cost_finite(model, policy, &spec.cost, t)?[model.initial_state()],
            0.0,
        )),
        (true, None) => {
            let cert = eval::rs_cost_infinite(
                model,
                policy,
                &spec.cost,
                rs_tol,
                eval::DEFAULT_CERTIFY_CAP,
            )?;
            let at = cert.at(model.initial_state());
            Ok((at.value, at.radius))
        }
    }
}

/// Evaluates the policy against every constraint of the given mode.
///
/// Constraints are evaluated at the model's designated initial state. For
/// infinite-horizon risk-sensitive constraints the certified interval's
/// upper end is used, so a constraint counts as satisfied only when it
/// provably holds up to `tol`.
pub fn check_feasibility(
    model: &MdpModel,
    policy: &MarkovPolicy,
    mode: Mode,
    horizon: Option<usize>,
    tol: f64,
) -> Result<FeasibilityVerdict> {
    let bounds = TruncatedBounds::new(model, mode, horizon)?;
    let mut slacks = Vec::with_capacity(bounds.effective().len());
    let mut uncertainty = 0.0_f64;
    for eff in bounds.effective() {
        let (value, radius) = achieved_value(model, policy, eff, tol / 10.0)?;
        slacks.push(eff.bound - (value + radius));
        uncertainty = uncertainty.max(radius);
    }
    let max_violation = slacks.iter().copied().reduce(f64::min).map(|s| -s);
    let feasible = max_violation.is_none_or(|v| v <= tol);
    Ok(FeasibilityVerdict {
        feasible,
        slacks,
        max_violation,
        uncertainty,
    })
}

/// The maximum constraint violation `h` of the original problem:
/// `max_i (achieved_i - bound_i)` at the initial state, `None` when the
/// model is unconstrained. Infinite-horizon risk-sensitive terms use the
/// certified midpoint with radius at most `tol / 10`, reported back as
/// uncertainty.
pub fn max_violation(
    model: &MdpModel,
    policy: &MarkovPolicy,
    tol: f64,
) -> Result<Option<ViolationReport>> {
    if model.constraints().is_empty() {
        return Ok(None);
    }
    let bounds = TruncatedBounds::new(model, Mode::Original, None)?;
    let mut h = f64::NEG_INFINITY;
    let mut uncertainty = 0.0_f64;
    for eff in bounds.effective() {
        let (value, radius) = achieved_value(model, policy, eff, tol / 10.0)?;
        h = h.max(value - eff.bound);
        uncertainty = uncertainty.max(radius);
    }
    Ok(Some(ViolationReport { h, uncertainty }))
}

/// True when every constraint's achieved value is at most its original
/// bound plus `eps` (up to `tol`). Unconstrained models are trivially
/// feasible.
pub fn is_eps_feasible(
    model: &MdpModel,
    policy: &MarkovPolicy,
    eps: f64,
    tol: f64,
) -> Result<bool> {
    let verdict = check_feasibility(model, policy, Mode::Original, None, tol)?;
    Ok(verdict.max_violation.is_none_or(|v| v <= eps + tol))
}

/// Smallest horizon T with `K beta^T <= eps/2` and
/// `exp(|gamma| K) (K_T - 1) <= eps/2`: solving the outer problem at such
/// T yields a policy that is eps-feasible for the original problem.
pub fn horizon_for_epsilon(model: &MdpModel, eps: f64, cap: usize) -> Result<usize> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::DimensionMismatch(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let bounds = cost_bound(model);
    let scale = (bounds.gamma_abs() * bounds.k).exp();
    for t in 1..=cap {
        let tail = bounds.k * model.beta().powi(t as i32);
        if tail <= eps / 2.0 && scale * bounds.k_t_minus_one(t) <= eps / 2.0 {
            return Ok(t);
        }
    }
    Err(Error::HorizonCapExceeded { cap })
}
