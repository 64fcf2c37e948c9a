//! The four scalarization strategies.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats::{
    dot, moments, per_objective_advantages, standardize, Deviation, GroupStats, RewardGroup, WeightVector,
};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    #[cfg_attr(feature = "serde", serde(rename = "rc"))]
    RewardCombination,
    #[cfg_attr(feature = "serde", serde(rename = "ac"))]
    AdvantageCombination,
    #[cfg_attr(feature = "serde", serde(rename = "gdpo"))]
    Gdpo,
    #[cfg_attr(feature = "serde", serde(rename = "dvao"))]
    Dvao,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::RewardCombination,
        Method::AdvantageCombination,
        Method::Gdpo,
        Method::Dvao,
    ];

    /// Short name used in config files and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Method::RewardCombination => "rc",
            Method::AdvantageCombination => "ac",
            Method::Gdpo => "gdpo",
            Method::Dvao => "dvao",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMethod;

impl fmt::Display for UnknownMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected one of rc, ac, gdpo, dvao")
    }
}

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rc" | "reward_combination" => Ok(Method::RewardCombination),
            "ac" | "advantage_combination" => Ok(Method::AdvantageCombination),
            "gdpo" => Ok(Method::Gdpo),
            "dvao" => Ok(Method::Dvao),
            _ => Err(UnknownMethod),
        }
    }
}

/// Output of a combiner for one rollout group.
///
/// Per-objective advantages and the group statistics are kept alongside the
/// combined value so identity checks never have to recompute them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AdvantageBundle {
    /// `A_k[j]`, `G × n`.
    pub per_objective: Matrix,
    /// One advantage per rollout.
    pub combined: Vec<f64>,
    pub method: Method,
    /// `w̃` for DVAO, the static weights otherwise.
    pub dynamic_weights: Vec<f64>,
    pub stats: GroupStats,
    /// Set when the combiner's normalizer was zero and `combined` was zeroed.
    pub degenerate: bool,
}

impl AdvantageBundle {
    pub fn group_size(&self) -> usize {
        self.combined.len()
    }
}

/// Runs the combiners under a chosen standard-deviation convention.
///
/// [`AdvantageEstimator::default`] uses population statistics, which is what
/// every free function in this module uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdvantageEstimator {
    pub deviation: Deviation,
}

impl AdvantageEstimator {
    pub fn new(deviation: Deviation) -> Self {
        Self { deviation }
    }

    fn prepare(&self, group: &RewardGroup, w: &WeightVector) -> Result<(GroupStats, Matrix)> {
        let stats = GroupStats::compute_with(group, w, self.deviation)?;
        Ok((stats, per_objective_advantages(group, self.deviation)))
    }

    pub fn reward_combination(&self, group: &RewardGroup, w: &WeightVector) -> Result<AdvantageBundle> {
        let (stats, per_objective) = self.prepare(group, w)?;
        let r_sum = group.combined_rewards(w)?;
        let (mean, std) = moments(&r_sum, self.deviation);
        Ok(AdvantageBundle {
            combined: standardize(&r_sum, mean, std),
            degenerate: std < tol::DEGENERATE,
            per_objective,
            method: Method::RewardCombination,
            dynamic_weights: w.as_slice().to_vec(),
            stats,
        })
    }

    pub fn advantage_combination(&self, group: &RewardGroup, w: &WeightVector) -> Result<AdvantageBundle> {
        let (stats, per_objective) = self.prepare(group, w)?;
        let combined = per_objective.iter_rows().map(|row| dot(w.as_slice(), row)).collect();
        let degenerate = (0..stats.stds.len()).all(|k| stats.is_degenerate(k));
        Ok(AdvantageBundle {
            per_objective,
            combined,
            method: Method::AdvantageCombination,
            dynamic_weights: w.as_slice().to_vec(),
            stats,
            degenerate,
        })
    }

    pub fn dvao(&self, group: &RewardGroup, w: &WeightVector) -> Result<AdvantageBundle> {
        let (stats, per_objective) = self.prepare(group, w)?;
        let s = stats.weighted_std_sum;
        if s < tol::DEGENERATE {
            return Ok(AdvantageBundle {
                combined: vec![0.0; group.group_size()],
                dynamic_weights: vec![0.0; group.num_objectives()],
                per_objective,
                method: Method::Dvao,
                stats,
                degenerate: true,
            });
        }
        let dynamic_weights: Vec<f64> = w
            .as_slice()
            .iter()
            .zip(&stats.stds)
            .map(|(wk, sk)| wk * sk / s)
            .collect();
        let combined = per_objective
            .iter_rows()
            .map(|row| dot(&dynamic_weights, row))
            .collect();
        Ok(AdvantageBundle {
            per_objective,
            combined,
            method: Method::Dvao,
            dynamic_weights,
            stats,
            degenerate: false,
        })
    }

    /// Advantage combination followed by batch normalization of this single group.
    pub fn gdpo(&self, group: &RewardGroup, w: &WeightVector) -> Result<AdvantageBundle> {
        let ac = self.advantage_combination(group, w)?;
        let mut out = self.gdpo_batch_normalize(vec![ac])?;
        Ok(out.remove(0))
    }

    /// Dispatches on `method`. GDPO here normalizes over the single group;
    /// use [`Self::gdpo_batch_normalize`] to pool over a batch.
    pub fn combine(&self, group: &RewardGroup, w: &WeightVector, method: Method) -> Result<AdvantageBundle> {
        match method {
            Method::RewardCombination => self.reward_combination(group, w),
            Method::AdvantageCombination => self.advantage_combination(group, w),
            Method::Gdpo => self.gdpo(group, w),
            Method::Dvao => self.dvao(group, w),
        }
    }

    /// Pools every combined advantage in the batch and standardizes with the
    /// pooled mean and standard deviation. A degenerate pool is left untouched.
    pub fn gdpo_batch_normalize(&self, bundles: Vec<AdvantageBundle>) -> Result<Vec<AdvantageBundle>> {
        if bundles.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if let Some((index, b)) = bundles
            .iter()
            .enumerate()
            .find(|(_, b)| b.method != Method::AdvantageCombination)
        {
            return Err(Error::WrongMethod { index, found: b.method });
        }
        let pooled: Vec<f64> = bundles.iter().flat_map(|b| b.combined.iter().copied()).collect();
        let (mean, std) = moments(&pooled, self.deviation);
        let pool_degenerate = std < tol::DEGENERATE;
        Ok(bundles
            .into_iter()
            .map(|mut b| {
                if !pool_degenerate {
                    b.combined = standardize(&b.combined, mean, std);
                }
                b.degenerate |= pool_degenerate;
                b.method = Method::Gdpo;
                b
            })
            .collect())
    }
}

/// Normalize the convex combination of raw rewards.
pub fn reward_combination(group: &RewardGroup, w: &WeightVector) -> Result<AdvantageBundle> {
    AdvantageEstimator::default().reward_combination(group, w)
}

/// Convex combination of per-objective advantages.
pub fn advantage_combination(group: &RewardGroup, w: &WeightVector) -> Result<AdvantageBundle> {
    AdvantageEstimator::default().advantage_combination(group, w)
}

/// Advantage combination with weights `w̃_k = w_k σ_k / Σ_l w_l σ_l`.
pub fn dvao(group: &RewardGroup, w: &WeightVector) -> Result<AdvantageBundle> {
    AdvantageEstimator::default().dvao(group, w)
}

pub fn gdpo_batch_normalize(bundles: Vec<AdvantageBundle>) -> Result<Vec<AdvantageBundle>> {
    AdvantageEstimator::default().gdpo_batch_normalize(bundles)
}

pub fn combine(group: &RewardGroup, w: &WeightVector, method: Method) -> Result<AdvantageBundle> {
    AdvantageEstimator::default().combine(group, w, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{normalize_objective, QueryId};
    use proptest::prelude::*;

    const SQRT2: f64 = core::f64::consts::SQRT_2;

    fn group(columns: &[&[f64]]) -> RewardGroup {
        RewardGroup::from_columns(QueryId(0), columns).unwrap()
    }

    fn half() -> WeightVector {
        WeightVector::new(vec![0.5, 0.5]).unwrap()
    }

    fn orthogonal() -> RewardGroup {
        group(&[&[0.0, 1.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 1.0]])
    }

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() < tol, "{actual:?} vs {expected:?}");
        }
    }

    // Direct evaluation of each formula from raw rewards, no shared helpers.
    fn oracle_std(xs: &[f64]) -> (f64, f64) {
        let g = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / g;
        (m, libm::sqrt(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / g))
    }

    #[test]
    fn reward_combination_example() {
        let b = reward_combination(&orthogonal(), &half()).unwrap();
        // r_sum = [0, .5, .5, 1], μ = .5, σ = √.125
        let (m, s) = oracle_std(&[0.0, 0.5, 0.5, 1.0]);
        let oracle: Vec<f64> = [0.0, 0.5, 0.5, 1.0].iter().map(|r| (r - m) / s).collect();
        assert_close(&oracle, &[-SQRT2, 0.0, 0.0, SQRT2], 1e-12);
        assert_close(&b.combined, &oracle, 1e-12);
        assert_eq!(b.method, Method::RewardCombination);
        assert!(!b.degenerate);
    }

    #[test]
    fn reward_combination_single_objective_and_degenerate() {
        let g = group(&[&[0.0, 0.0, 0.0, 1.0]]);
        let w = WeightVector::uniform(1).unwrap();
        assert_eq!(
            reward_combination(&g, &w).unwrap().combined,
            normalize_objective(&g, 0).unwrap()
        );

        let g = group(&[&[0.3; 5], &[0.9; 5]]);
        let b = reward_combination(&g, &half()).unwrap();
        assert_eq!(b.combined, vec![0.0; 5]);
        assert!(b.degenerate);
    }

    #[test]
    fn advantage_combination_examples() {
        let b = advantage_combination(&orthogonal(), &half()).unwrap();
        assert_close(&b.combined, &[-1.0, 0.0, 0.0, 1.0], 1e-12);

        let g = group(&[&[0.1, 0.7, 0.4]]);
        let w = WeightVector::uniform(1).unwrap();
        assert_eq!(
            advantage_combination(&g, &w).unwrap().combined,
            reward_combination(&g, &w).unwrap().combined
        );

        let w = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let b = advantage_combination(&orthogonal(), &w).unwrap();
        assert_eq!(b.combined, normalize_objective(&orthogonal(), 0).unwrap());
    }

    #[test]
    fn dvao_examples() {
        let b = dvao(&orthogonal(), &half()).unwrap();
        assert_close(&b.dynamic_weights, &[0.5, 0.5], 1e-15);
        assert_close(
            &b.combined,
            &advantage_combination(&orthogonal(), &half()).unwrap().combined,
            1e-12,
        );

        let r1 = [0.1, 0.8, 0.35, 0.6, 0.2];
        let g = group(&[&r1, &r1]);
        let w = WeightVector::new(vec![0.3, 0.7]).unwrap();
        assert_close(
            &dvao(&g, &w).unwrap().combined,
            &reward_combination(&g, &w).unwrap().combined,
            1e-9,
        );

        // σ₁ = .5, σ₂ = .1 → w̃ = [5/6, 1/6]
        let g = group(&[&[0.0, 1.0, 0.0, 1.0], &[0.4, 0.6, 0.4, 0.6]]);
        let b = dvao(&g, &half()).unwrap();
        assert!((b.stats.stds[1] - 0.1).abs() < 1e-12);
        let oracle_w1: f64 = 0.5 * 0.5 / (0.5 * 0.5 + 0.5 * 0.1);
        assert!((oracle_w1 - 5.0 / 6.0).abs() < 1e-15);
        assert_close(&b.dynamic_weights, &[5.0 / 6.0, 1.0 / 6.0], 1e-12);
    }

    #[test]
    fn dvao_degenerate_group_is_flagged() {
        let g = group(&[&[0.2; 3], &[0.8; 3]]);
        let b = dvao(&g, &half()).unwrap();
        assert!(b.degenerate);
        assert_eq!(b.combined, vec![0.0; 3]);
        assert_eq!(b.dynamic_weights, vec![0.0; 2]);
    }

    #[test]
    fn gdpo_examples() {
        let ac = advantage_combination(&orthogonal(), &half()).unwrap();
        let out = gdpo_batch_normalize(vec![ac.clone()]).unwrap();
        // pooled μ = 0, σ = √0.5
        let (m, s) = oracle_std(&[-1.0, 0.0, 0.0, 1.0]);
        assert!(m.abs() < 1e-15 && (s - libm::sqrt(0.5)).abs() < 1e-15);
        assert_close(&out[0].combined, &[-SQRT2, 0.0, 0.0, SQRT2], 1e-12);
        assert_eq!(out[0].method, Method::Gdpo);

        let twice = gdpo_batch_normalize(vec![ac.clone(), ac.clone()]).unwrap();
        assert_eq!(twice[0].combined, twice[1].combined);
        assert_close(&twice[0].combined, &out[0].combined, 1e-12);

        let flat = advantage_combination(&group(&[&[0.4; 4], &[0.6; 4]]), &half()).unwrap();
        let out = gdpo_batch_normalize(vec![flat.clone(), flat]).unwrap();
        assert!(out.iter().all(|b| b.combined == vec![0.0; 4]));
    }

    #[test]
    fn gdpo_errors() {
        assert_eq!(gdpo_batch_normalize(Vec::new()).unwrap_err(), Error::EmptyBatch);
        let rc = reward_combination(&orthogonal(), &half()).unwrap();
        assert!(matches!(
            gdpo_batch_normalize(vec![rc]),
            Err(Error::WrongMethod {
                index: 0,
                found: Method::RewardCombination
            })
        ));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("sum".parse::<Method>().is_err());
    }

    fn arb_case() -> impl Strategy<Value = (RewardGroup, WeightVector)> {
        (2usize..32, 1usize..6).prop_flat_map(|(g, n)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, n), g),
                proptest::collection::vec(0.001f64..1.0, n),
            )
                .prop_map(|(rows, raw)| {
                    let total: f64 = raw.iter().sum();
                    let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
                    let head: f64 = w[..w.len() - 1].iter().sum();
                    *w.last_mut().unwrap() = (1.0 - head).max(0.0);
                    (
                        RewardGroup::from_rows(QueryId(3), &rows).unwrap(),
                        WeightVector::new(w).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn key_identity_and_pointwise_bound((g, w) in arb_case()) {
            let rc = reward_combination(&g, &w).unwrap();
            let dv = dvao(&g, &w).unwrap();
            for j in 0..g.group_size() {
                let lhs = rc.stats.combined_std * rc.combined[j];
                let rhs: f64 = (0..g.num_objectives())
                    .map(|k| w.as_slice()[k] * rc.stats.stds[k] * rc.per_objective[(j, k)])
                    .sum();
                prop_assert!((lhs - rhs).abs() < tol::ASSERT);
                prop_assert!(dv.combined[j].abs() <= rc.combined[j].abs() + tol::ASSERT);
            }
            if !dv.degenerate {
                let total: f64 = dv.dynamic_weights.iter().sum();
                prop_assert!((total - 1.0).abs() < tol::WEIGHT_SUM);
            }
        }

        #[test]
        fn single_objective_collapse(column in proptest::collection::vec(0.0f64..=1.0, 2..40)) {
            let g = RewardGroup::from_columns(QueryId(0), &[column]).unwrap();
            let w = WeightVector::uniform(1).unwrap();
            let rc = reward_combination(&g, &w).unwrap().combined;
            prop_assert_eq!(&advantage_combination(&g, &w).unwrap().combined, &rc);
            prop_assert_eq!(&dvao(&g, &w).unwrap().combined, &rc);
        }

        #[test]
        fn scaling_a_column_shifts_dynamic_weight_towards_it(
            (g, _w) in arb_case(),
            c1 in 0.1f64..1.0,
            c2 in 0.1f64..1.0,
        ) {
            prop_assume!(g.num_objectives() >= 2);
            let n = g.num_objectives();
            let w = WeightVector::uniform(n).unwrap();
            prop_assume!(compute(&g, &w).stats.stds.iter().all(|&s| s > 1e-3));
            let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
            let scaled = |c: f64| {
                let cols: Vec<Vec<f64>> = (0..n)
                    .map(|k| g.rewards().column(k).map(|x| if k == 0 { c * x } else { x }).collect())
                    .collect();
                RewardGroup::from_columns(QueryId(0), &cols).unwrap()
            };
            let low = compute(&scaled(lo), &w);
            let high = compute(&scaled(hi), &w);
            for j in 0..g.group_size() {
                prop_assert!((low.per_objective[(j, 0)] - high.per_objective[(j, 0)]).abs() < 1e-9);
            }
            prop_assert!(low.dynamic_weights[0] <= high.dynamic_weights[0] + 1e-15);
        }
    }

    fn compute(g: &RewardGroup, w: &WeightVector) -> AdvantageBundle {
        dvao(g, w).unwrap()
    }
}
