//! Rollout groups, convex weights and per-group population statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Axis, Error, Result};
use crate::matrix::Matrix;
use crate::tol;

/// Opaque identifier of the query a rollout group was sampled for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct QueryId(pub u64);

/// Divisor used for standard deviations.
///
/// Every identity in [`crate::analysis`] relies on `Population`; `Sample`
/// exists so tests can check that the verifiers notice when it is swapped in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Deviation {
    /// Divide by `G`.
    #[default]
    Population,
    /// Divide by `G - 1`.
    Sample,
}

/// Mean and standard deviation of `values`, two-pass.
pub(crate) fn moments(values: &[f64], deviation: Deviation) -> (f64, f64) {
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let divisor = match deviation {
        Deviation::Population => len,
        Deviation::Sample => len - 1.0,
    };
    (mean, libm::sqrt(ss / divisor))
}

/// `(x - mean) / std`, or all zeros when `std` is degenerate.
pub(crate) fn standardize(values: &[f64], mean: f64, std: f64) -> Vec<f64> {
    if std < tol::DEGENERATE {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// The `G × n` reward block for one query: row `j` is rollout `j`, column `k`
/// is objective `k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RewardGroup {
    query_id: QueryId,
    rewards: Matrix,
}

impl RewardGroup {
    /// Validates shape (`G >= 2`, `n >= 1`) and that every reward lies in `[0, 1]`.
    pub fn new(query_id: QueryId, rewards: Matrix) -> Result<Self> {
        let group = Self::new_unbounded(query_id, rewards)?;
        for (j, row) in group.rewards.iter_rows().enumerate() {
            for (k, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::RewardOutOfRange { row: j, col: k, value });
                }
            }
        }
        Ok(group)
    }

    pub fn from_rows<R: AsRef<[f64]>>(query_id: QueryId, rows: &[R]) -> Result<Self> {
        let expected = rows.first().map_or(0, |r| r.as_ref().len());
        let rewards = Matrix::from_rows(rows).ok_or_else(|| Error::DimensionMismatch {
            axis: Axis::Objectives,
            expected,
            found: rows
                .iter()
                .map(|r| r.as_ref().len())
                .find(|&l| l != expected)
                .unwrap_or(expected),
        })?;
        Self::new(query_id, rewards)
    }

    /// Builds a group from per-objective columns of equal length.
    pub fn from_columns<C: AsRef<[f64]>>(query_id: QueryId, columns: &[C]) -> Result<Self> {
        let g = columns.first().map_or(0, |c| c.as_ref().len());
        let mut rows = vec![vec![0.0; columns.len()]; g];
        for (k, col) in columns.iter().enumerate() {
            let col = col.as_ref();
            if col.len() != g {
                return Err(Error::DimensionMismatch {
                    axis: Axis::Rollouts,
                    expected: g,
                    found: col.len(),
                });
            }
            for (j, &v) in col.iter().enumerate() {
                rows[j][k] = v;
            }
        }
        if columns.is_empty() {
            return Err(Error::NoObjectives);
        }
        Self::from_rows(query_id, &rows)
    }

    /// Shape checks only; rewards may leave `[0, 1]`. The combiner arithmetic
    /// is total on the reals, which the finite-difference oracle relies on.
    pub(crate) fn new_unbounded(query_id: QueryId, rewards: Matrix) -> Result<Self> {
        if rewards.rows() < 2 {
            return Err(Error::GroupTooSmall(rewards.rows()));
        }
        if rewards.cols() == 0 {
            return Err(Error::NoObjectives);
        }
        Ok(Self { query_id, rewards })
    }

    pub fn query_id(&self) -> QueryId {
        self.query_id
    }

    pub fn rewards(&self) -> &Matrix {
        &self.rewards
    }

    pub fn group_size(&self) -> usize {
        self.rewards.rows()
    }

    pub fn num_objectives(&self) -> usize {
        self.rewards.cols()
    }

    /// Rewards of objective `k` across the group.
    pub fn objective(&self, k: usize) -> Result<Vec<f64>> {
        self.check_objective(k)?;
        Ok(self.rewards.column(k).collect())
    }

    pub(crate) fn check_objective(&self, k: usize) -> Result<()> {
        if k >= self.num_objectives() {
            return Err(Error::IndexOutOfBounds {
                axis: Axis::Objectives,
                index: k,
                len: self.num_objectives(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.len() != self.num_objectives() {
            return Err(Error::DimensionMismatch {
                axis: Axis::Weights,
                expected: self.num_objectives(),
                found: w.len(),
            });
        }
        Ok(())
    }

    /// `r_sum[j] = Σ_k w_k r_k[j]`.
    pub fn combined_rewards(&self, w: &WeightVector) -> Result<Vec<f64>> {
        self.check_weights(w)?;
        Ok(self.rewards.iter_rows().map(|row| dot(w.as_slice(), row)).collect())
    }

    pub(crate) fn with_entry(&self, j: usize, k: usize, value: f64) -> Self {
        let mut rewards = self.rewards.clone();
        rewards[(j, k)] = value;
        Self {
            query_id: self.query_id,
            rewards,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Convex combination weights over the objectives.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Every weight must lie in `[0, 1]` and the sum must be one within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NoObjectives);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::WeightOutOfRange { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if libm::fabs(sum - 1.0) > tol::WEIGHT_SUM {
            return Err(Error::WeightSum(sum));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoObjectives);
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// `[w1, 1 - w1]`.
    pub fn pair(w1: f64) -> Result<Self> {
        Self::new(vec![w1, 1.0 - w1])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Group statistics shared by every combiner.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GroupStats {
    /// `μ_k`, one per objective.
    pub means: Vec<f64>,
    /// `σ_k`, one per objective.
    pub stds: Vec<f64>,
    /// Mean of `r_sum` over the group.
    pub combined_mean: f64,
    /// `σ_sum`, the standard deviation of `r_sum`.
    pub combined_std: f64,
    /// `S = Σ_k w_k σ_k`.
    pub weighted_std_sum: f64,
}

impl GroupStats {
    pub fn compute(group: &RewardGroup, w: &WeightVector) -> Result<Self> {
        Self::compute_with(group, w, Deviation::Population)
    }

    pub fn compute_with(group: &RewardGroup, w: &WeightVector, deviation: Deviation) -> Result<Self> {
        group.check_weights(w)?;
        let n = group.num_objectives();
        let mut means = Vec::with_capacity(n);
        let mut stds = Vec::with_capacity(n);
        for k in 0..n {
            let column: Vec<f64> = group.rewards.column(k).collect();
            let (mean, std) = moments(&column, deviation);
            means.push(mean);
            stds.push(std);
        }
        let (combined_mean, combined_std) = moments(&group.combined_rewards(w)?, deviation);
        let weighted_std_sum = dot(w.as_slice(), &stds);
        Ok(Self {
            means,
            stds,
            combined_mean,
            combined_std,
            weighted_std_sum,
        })
    }

    /// True when objective `k` has no usable spread.
    pub fn is_degenerate(&self, k: usize) -> bool {
        self.stds[k] < tol::DEGENERATE
    }
}

/// Population mean and standard deviation of every objective plus the
/// weighted combination.
pub fn compute_group_stats(group: &RewardGroup, w: &WeightVector) -> Result<GroupStats> {
    GroupStats::compute(group, w)
}

/// Per-objective advantage `A_k[j] = (r_k[j] - μ_k) / σ_k`, all zeros when `σ_k` is degenerate.
pub fn normalize_objective(group: &RewardGroup, k: usize) -> Result<Vec<f64>> {
    normalize_objective_with(group, k, Deviation::Population)
}

pub(crate) fn normalize_objective_with(group: &RewardGroup, k: usize, deviation: Deviation) -> Result<Vec<f64>> {
    let column = group.objective(k)?;
    let (mean, std) = moments(&column, deviation);
    Ok(standardize(&column, mean, std))
}

/// All per-objective advantages as a `G × n` matrix.
pub(crate) fn per_objective_advantages(group: &RewardGroup, deviation: Deviation) -> Matrix {
    let (g, n) = (group.group_size(), group.num_objectives());
    let mut out = Matrix::zeros(g, n);
    for k in 0..n {
        let column: Vec<f64> = group.rewards.column(k).collect();
        let (mean, std) = moments(&column, deviation);
        for (j, a) in standardize(&column, mean, std).into_iter().enumerate() {
            out[(j, k)] = a;
        }
    }
    out
}

/// `ρ̂_kl = (1/G) Σ_j A_k[j] A_l[j]`; zero whenever either objective is degenerate.
pub fn correlation_matrix(group: &RewardGroup) -> Matrix {
    correlation_matrix_with(group, Deviation::Population)
}

pub(crate) fn correlation_matrix_with(group: &RewardGroup, deviation: Deviation) -> Matrix {
    correlation_from_advantages(&per_objective_advantages(group, deviation))
}

pub(crate) fn correlation_from_advantages(advantages: &Matrix) -> Matrix {
    let (g, n) = (advantages.rows(), advantages.cols());
    let columns: Vec<Vec<f64>> = (0..n).map(|k| advantages.column(k).collect()).collect();
    let mut rho = Matrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let value = dot(&columns[k], &columns[l]) / g as f64;
            rho[(k, l)] = value;
            rho[(l, k)] = value;
        }
    }
    rho
}
