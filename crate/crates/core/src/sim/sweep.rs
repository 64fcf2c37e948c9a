use alloc::vec::Vec;

use super::env::Environment;
use super::train::{expected_batch_rewards, train, TrainConfig};
use crate::combiners::Method;
use crate::error::{Error, Result};
use crate::stats::WeightVector;

/// The objective-1 weight grid of the reference sweep.
pub const DEFAULT_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Final-policy outcome of one `(combiner, w1)` training run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepRow {
    pub combiner: Method,
    pub w1: f64,
    /// Exact expected objective-1 reward of the final policy.
    pub exp_reward_1: f64,
    pub exp_reward_2: f64,
    pub seed: u64,
}

/// Trains once per `(w1, combiner)` with weights `[w1, 1 - w1]` and reports
/// exact expected rewards. Rows are ordered by `w1`, then by the order of
/// `combiners`. Every run uses `base.seed`.
pub fn pareto_sweep(
    base: &TrainConfig,
    env: &dyn Environment,
    w1_grid: &[f64],
    combiners: &[Method],
) -> Result<Vec<SweepRow>> {
    if env.num_objectives() != 2 {
        return Err(Error::InvalidParameter {
            name: "environment",
            reason: "weight sweeps need exactly two objectives",
        });
    }
    if w1_grid.is_empty() || combiners.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if w1_grid.iter().any(|&w1| !(w1 > 0.0 && w1 < 1.0)) {
        return Err(Error::InvalidParameter {
            name: "w1_grid",
            reason: "every w1 must lie strictly between 0 and 1",
        });
    }
    let mut grid = w1_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(grid.len() * combiners.len());
    for &w1 in &grid {
        for &combiner in combiners {
            let config = TrainConfig {
                combiner,
                weights: WeightVector::pair(w1)?,
                ..base.clone()
            };
            let outcome = train(&config, env)?;
            if let Some(err) = outcome.abort {
                return Err(err);
            }
            let expected = expected_batch_rewards(&outcome.policy, &config.queries, env)?;
            rows.push(SweepRow {
                combiner,
                w1,
                exp_reward_1: expected[0],
                exp_reward_2: expected[1],
                seed: config.seed,
            });
        }
    }
    Ok(rows)
}
