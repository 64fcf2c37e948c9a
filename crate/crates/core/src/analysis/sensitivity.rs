//! Sensitivity of the combined advantage to a single raw reward.
//!
//! With `∂μ_k/∂r_k[j] = 1/G` and `∂σ_k/∂r_k[j] = A_k[j]/G` (population
//! statistics), the own-rollout derivatives are
//!
//! ```text
//! AC:   ∂A[j]/∂r_k[j]      = (w_k / σ_k) (1 - 1/G - A_k[j]² / G)
//! DVAO: ∂A_DVAO[j]/∂r_k[j] = (w̃_k / σ_k) (1 - 1/G - A_DVAO[j] A_k[j] / G)
//! ```
//!
//! The numeric side perturbs one reward by `±h` and reruns the whole
//! combiner, so every statistic responds to the perturbation.

use alloc::vec::Vec;

use crate::combiners::{AdvantageEstimator, Method};
use crate::error::{Axis, Error, Result};
use crate::matrix::Matrix;
use crate::stats::{RewardGroup, WeightVector};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SensitivityMethod {
    AdvantageCombination,
    Dvao,
}

impl SensitivityMethod {
    pub const ALL: [SensitivityMethod; 2] = [SensitivityMethod::AdvantageCombination, SensitivityMethod::Dvao];

    fn combiner(self) -> Method {
        match self {
            SensitivityMethod::AdvantageCombination => Method::AdvantageCombination,
            SensitivityMethod::Dvao => Method::Dvao,
        }
    }
}

/// Closed-form derivatives; columns of degenerate objectives are `NaN` and
/// flagged in `defined`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub values: Matrix,
    pub defined: Vec<bool>,
}

pub fn sensitivity_analytic(group: &RewardGroup, w: &WeightVector, method: SensitivityMethod) -> Result<Sensitivity> {
    let estimator = AdvantageEstimator::default();
    let bundle = estimator.combine(group, w, method.combiner())?;
    let (g, n) = (group.group_size(), group.num_objectives());
    let inv_g = 1.0 / g as f64;
    let mut values = Matrix::zeros(g, n);
    let mut defined = Vec::with_capacity(n);
    for k in 0..n {
        let sigma = bundle.stats.stds[k];
        let ok = !bundle.stats.is_degenerate(k);
        defined.push(ok);
        for j in 0..g {
            let a_k = bundle.per_objective[(j, k)];
            values[(j, k)] = if !ok {
                f64::NAN
            } else {
                match method {
                    SensitivityMethod::AdvantageCombination => {
                        w.as_slice()[k] / sigma * (1.0 - inv_g - inv_g * a_k * a_k)
                    }
                    SensitivityMethod::Dvao => {
                        let a = bundle.combined[j];
                        bundle.dynamic_weights[k] / sigma * (1.0 - inv_g - inv_g * a * a_k)
                    }
                }
            };
        }
    }
    Ok(Sensitivity { values, defined })
}

fn check_step(h: f64) -> Result<()> {
    if !(h >= tol::FD_MIN_STEP) || !h.is_finite() {
        return Err(Error::StepTooSmall(h));
    }
    Ok(())
}

fn perturbed(
    estimator: AdvantageEstimator,
    group: &RewardGroup,
    w: &WeightVector,
    method: SensitivityMethod,
    (j, k): (usize, usize),
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = group.rewards()[(j, k)];
    let plus = estimator.combine(&group.with_entry(j, k, r + h), w, method.combiner())?;
    let minus = estimator.combine(&group.with_entry(j, k, r - h), w, method.combiner())?;
    Ok((plus.combined, minus.combined))
}

/// Central differences `[C(r + h) - C(r - h)] / 2h` for every own-rollout entry.
pub fn sensitivity_numeric(group: &RewardGroup, w: &WeightVector, method: SensitivityMethod, h: f64) -> Result<Matrix> {
    check_step(h)?;
    group.check_weights(w)?;
    let estimator = AdvantageEstimator::default();
    let (g, n) = (group.group_size(), group.num_objectives());
    let mut out = Matrix::zeros(g, n);
    for j in 0..g {
        for k in 0..n {
            let (plus, minus) = perturbed(estimator, group, w, method, (j, k), h)?;
            out[(j, k)] = (plus[j] - minus[j]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// `∂C[j']/∂r_k[j]` for every rollout `j'` by central differences. No closed
/// form is asserted for `j' != j`.
pub fn cross_rollout_derivatives(
    group: &RewardGroup,
    w: &WeightVector,
    method: SensitivityMethod,
    (j, k): (usize, usize),
    h: f64,
) -> Result<Vec<f64>> {
    check_step(h)?;
    group.check_weights(w)?;
    if j >= group.group_size() {
        return Err(Error::IndexOutOfBounds {
            axis: Axis::Rollouts,
            index: j,
            len: group.group_size(),
        });
    }
    group.check_objective(k)?;
    let (plus, minus) = perturbed(AdvantageEstimator::default(), group, w, method, (j, k), h)?;
    Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SensitivityReport {
    pub method: SensitivityMethod,
    pub step: f64,
    pub analytic: Matrix,
    pub numeric: Matrix,
    pub defined: Vec<bool>,
    /// Max over defined entries of `|analytic - numeric| / max(|analytic|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(j, k)` of the entry attaining `max_rel_error`.
    pub worst: Option<(usize, usize)>,
}

pub fn sensitivity_report(
    group: &RewardGroup,
    w: &WeightVector,
    method: SensitivityMethod,
    h: f64,
) -> Result<SensitivityReport> {
    let analytic = sensitivity_analytic(group, w, method)?;
    let numeric = sensitivity_numeric(group, w, method, h)?;
    let mut max_rel_error: f64 = 0.0;
    let mut worst = None;
    for j in 0..analytic.values.rows() {
        for k in 0..analytic.values.cols() {
            if !analytic.defined[k] {
                continue;
            }
            let a = analytic.values[(j, k)];
            let err = libm::fabs(a - numeric[(j, k)]) / libm::fabs(a).max(tol::REL_FLOOR);
            if worst.is_none() || err > max_rel_error {
                max_rel_error = err;
                worst = Some((j, k));
            }
        }
    }
    Ok(SensitivityReport {
        method,
        step: h,
        analytic: analytic.values,
        numeric,
        defined: analytic.defined,
        max_rel_error,
        worst,
    })
}
