//! Numerical checks of the magnitude and sensitivity relations between the
//! combiners.
//!
//! - [`proposition1_check`]: mean-square advantage of reward combination is 1
//!   and dominates that of advantage combination, which equals
//!   `1 - 2 Σ_{k<l} w_k w_l (1 - ρ̂_kl)`.
//! - [`proposition2_check`]: `|A_DVAO[j]| <= |A_sum[j]|` pointwise, via the
//!   identity `σ_sum A_sum[j] = Σ_k w_k σ_k A_k[j]`.
//! - [`sensitivity`]: closed-form `∂A[j]/∂r_k[j]` for AC and DVAO against a
//!   central-difference oracle.
//! - [`suite`]: randomized runs of all three over seeded groups.

use alloc::vec::Vec;

use crate::combiners::{AdvantageBundle, AdvantageEstimator};
use crate::error::Result;
use crate::stats::{correlation_from_advantages, RewardGroup, WeightVector};
use crate::tol;

pub mod sensitivity;
pub mod suite;

pub use sensitivity::{
    cross_rollout_derivatives, sensitivity_analytic, sensitivity_numeric, sensitivity_report, Sensitivity,
    SensitivityMethod, SensitivityReport,
};
pub use suite::{
    mean_square_suite, pointwise_suite, sensitivity_suite, CriterionResult, SensitivitySuiteConfig, SuiteConfig,
    SuiteKind, SuiteReport, Witness, SENSITIVITY_TOLERANCE,
};

/// `(1/G) Σ_j combined[j]²`.
pub fn mean_square_advantage(bundle: &AdvantageBundle) -> f64 {
    let g = bundle.combined.len() as f64;
    bundle.combined.iter().map(|a| a * a).sum::<f64>() / g
}

/// Why a check was skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(
    feature = "serde",
    serde(rename_all = "snake_case", tag = "reason", content = "objective")
)]
pub enum Inapplicable {
    /// Objective `k` has zero spread, so `A_k` is not a normalized advantage.
    DegenerateObjective(usize),
    /// `σ_sum` is zero.
    DegenerateCombined,
}

/// Outcome of a check that only applies to non-degenerate groups.
#[derive(Debug, Clone, PartialEq)]
pub enum Check<T> {
    Applicable(T),
    NotApplicable(Inapplicable),
}

impl<T> Check<T> {
    pub fn applicable(self) -> Option<T> {
        match self {
            Check::Applicable(r) => Some(r),
            Check::NotApplicable(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MeanSquareReport {
    /// Mean-square of the reward-combination advantage.
    pub lhs: f64,
    /// Mean-square of the advantage-combination advantage.
    pub rhs: f64,
    /// `1 - 2 Σ_{k<l} w_k w_l (1 - ρ̂_kl)`.
    pub closed_form_rhs: f64,
    /// `|lhs - 1|`.
    pub unit_residual: f64,
    /// `|rhs - closed_form_rhs|`.
    pub closed_form_residual: f64,
    /// `lhs >= rhs - tol` and the closed form matches.
    pub holds: bool,
}

pub fn proposition1_check(group: &RewardGroup, w: &WeightVector) -> Result<Check<MeanSquareReport>> {
    proposition1_check_with(AdvantageEstimator::default(), group, w)
}

pub fn proposition1_check_with(
    estimator: AdvantageEstimator,
    group: &RewardGroup,
    w: &WeightVector,
) -> Result<Check<MeanSquareReport>> {
    let rc = estimator.reward_combination(group, w)?;
    if let Some(k) = (0..group.num_objectives()).find(|&k| rc.stats.is_degenerate(k)) {
        return Ok(Check::NotApplicable(Inapplicable::DegenerateObjective(k)));
    }
    let ac = estimator.advantage_combination(group, w)?;
    let rho = correlation_from_advantages(&ac.per_objective);
    let weights = w.as_slice();
    let mut penalty = 0.0;
    for k in 0..weights.len() {
        for l in k + 1..weights.len() {
            penalty += weights[k] * weights[l] * (1.0 - rho[(k, l)]);
        }
    }
    let lhs = mean_square_advantage(&rc);
    let rhs = mean_square_advantage(&ac);
    let closed_form_rhs = 1.0 - 2.0 * penalty;
    let closed_form_residual = libm::fabs(rhs - closed_form_rhs);
    Ok(Check::Applicable(MeanSquareReport {
        lhs,
        rhs,
        closed_form_rhs,
        unit_residual: libm::fabs(lhs - 1.0),
        closed_form_residual,
        holds: lhs >= rhs - tol::ASSERT && closed_form_residual < tol::ASSERT,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MagnitudePair {
    pub dvao: f64,
    pub reward_combination: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PointwiseReport {
    /// `(|A_DVAO[j]|, |A_sum[j]|)` per rollout.
    pub pairs: Vec<MagnitudePair>,
    /// `max_j |σ_sum A_sum[j] - Σ_k w_k σ_k A_k[j]|`.
    pub identity_residual: f64,
    /// `max_j (|A_DVAO[j]| - |A_sum[j]|)`; non-positive when the bound holds exactly.
    pub max_excess: f64,
    /// `max_j ||A_DVAO[j]| - |A_sum[j]||`, zero in the equality case.
    pub max_gap: f64,
    pub holds: bool,
}

pub fn proposition2_check(group: &RewardGroup, w: &WeightVector) -> Result<Check<PointwiseReport>> {
    proposition2_check_with(AdvantageEstimator::default(), group, w)
}

pub fn proposition2_check_with(
    estimator: AdvantageEstimator,
    group: &RewardGroup,
    w: &WeightVector,
) -> Result<Check<PointwiseReport>> {
    let rc = estimator.reward_combination(group, w)?;
    if rc.degenerate {
        return Ok(Check::NotApplicable(Inapplicable::DegenerateCombined));
    }
    let dv = estimator.dvao(group, w)?;
    if dv.degenerate {
        // S = 0 forces every σ_k to zero; report the first.
        return Ok(Check::NotApplicable(Inapplicable::DegenerateObjective(0)));
    }
    let weights = w.as_slice();
    let stats = &rc.stats;
    let mut pairs = Vec::with_capacity(group.group_size());
    let mut identity_residual: f64 = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_gap: f64 = 0.0;
    for j in 0..group.group_size() {
        let weighted: f64 = (0..weights.len())
            .map(|k| weights[k] * stats.stds[k] * rc.per_objective[(j, k)])
            .sum();
        identity_residual = identity_residual.max(libm::fabs(stats.combined_std * rc.combined[j] - weighted));
        let pair = MagnitudePair {
            dvao: libm::fabs(dv.combined[j]),
            reward_combination: libm::fabs(rc.combined[j]),
        };
        max_excess = max_excess.max(pair.dvao - pair.reward_combination);
        max_gap = max_gap.max(libm::fabs(pair.dvao - pair.reward_combination));
        pairs.push(pair);
    }
    Ok(Check::Applicable(PointwiseReport {
        pairs,
        identity_residual,
        max_excess,
        max_gap,
        holds: max_excess <= tol::ASSERT && identity_residual < tol::ASSERT,
    }))
}
