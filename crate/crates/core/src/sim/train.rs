use alloc::vec;
use alloc::vec::Vec;

use super::env::Environment;
use super::policy::PolicyTable;
use super::rollout::{sample_group, Rollout};
use super::surrogate::{batch_surrogate, GroupInput};
use crate::combiners::{AdvantageBundle, AdvantageEstimator, Method};
use crate::error::{Axis, Error, Result};
use crate::matrix::Matrix;
use crate::rng::derive_seed;
use crate::stats::{QueryId, RewardGroup, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub combiner: Method,
    pub weights: WeightVector,
    pub group_size: usize,
    pub clip_epsilon: f64,
    /// Constant step size of plain gradient ascent. Zero freezes the policy.
    pub learning_rate: f64,
    pub steps: usize,
    /// Queries sampled at every step; the policy table covers `0..=max id`.
    pub queries: Vec<QueryId>,
    pub seed: u64,
    /// Gradient steps per batch of rollouts, all against the same `π_old`.
    pub inner_epochs: usize,
    pub vocab_size: usize,
    pub max_length: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            combiner: Method::Dvao,
            weights: WeightVector::uniform(2).expect("two objectives"),
            group_size: 16,
            clip_epsilon: 0.2,
            learning_rate: 2.0,
            steps: 200,
            queries: (0..4).map(QueryId).collect(),
            seed: 20_240_601,
            inner_epochs: 1,
            vocab_size: 5,
            max_length: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |name, reason| Err(Error::InvalidParameter { name, reason });
        if self.group_size < 2 {
            return Err(Error::GroupTooSmall(self.group_size));
        }
        if !(self.clip_epsilon > 0.0) || !self.clip_epsilon.is_finite() {
            return invalid("clip_epsilon", "must be positive");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return invalid("learning_rate", "must be finite and non-negative");
        }
        if self.queries.is_empty() {
            return invalid("queries", "need at least one query");
        }
        if self.inner_epochs == 0 {
            return invalid("inner_epochs", "must be positive");
        }
        Ok(())
    }

    pub fn num_queries(&self) -> usize {
        self.queries.iter().map(|q| q.0 as usize + 1).max().unwrap_or(0)
    }

    pub fn initial_policy(&self) -> Result<PolicyTable> {
        PolicyTable::new(self.num_queries(), self.vocab_size, self.max_length)
    }
}

/// Metrics logged once per training step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RunRecord {
    pub step: usize,
    /// Per objective, exact expected reward of the pre-step policy, averaged
    /// over queries.
    pub reward_mean: Vec<f64>,
    /// Per objective, exact reward standard deviation of the pre-step
    /// policy, averaged over queries.
    pub reward_std: Vec<f64>,
    /// Mean `|A|` of the advantages that drove the update.
    pub mean_abs_advantage: f64,
    pub mean_length: f64,
    /// Surrogate at `θ = θ_old`, before the first inner update.
    pub surrogate: f64,
    pub millis: u64,
    /// Mean `|A_sum|` on the same groups.
    pub paired_abs_rc: f64,
    /// Mean `|A_DVAO|` on the same groups.
    pub paired_abs_dvao: f64,
    /// Groups whose combiner flagged a zero normalizer.
    pub degenerate_groups: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<RunRecord>,
    pub policy: PolicyTable,
    /// Set when training stopped on a non-finite parameter.
    pub abort: Option<Error>,
}

fn mean_abs(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + libm::fabs(v), c + 1));
    sum / count as f64
}

fn group_of(query: QueryId, rollouts: &[Rollout], n: usize) -> Result<RewardGroup> {
    let mut data = Vec::with_capacity(rollouts.len() * n);
    for r in rollouts {
        if r.rewards.len() != n {
            return Err(Error::DimensionMismatch {
                axis: Axis::Objectives,
                expected: n,
                found: r.rewards.len(),
            });
        }
        data.extend_from_slice(&r.rewards);
    }
    let rewards = Matrix::from_row_major(rollouts.len(), n, data).expect("sized above");
    RewardGroup::new(query, rewards)
}

/// Advantages for every group of one step under `method`. GDPO pools over
/// the whole batch.
pub fn batch_advantages(groups: &[RewardGroup], w: &WeightVector, method: Method) -> Result<Vec<AdvantageBundle>> {
    let estimator = AdvantageEstimator::default();
    match method {
        Method::Gdpo => {
            let ac = groups
                .iter()
                .map(|g| estimator.advantage_combination(g, w))
                .collect::<Result<Vec<_>>>()?;
            estimator.gdpo_batch_normalize(ac)
        }
        m => groups.iter().map(|g| estimator.combine(g, w, m)).collect(),
    }
}

/// Runs GRPO training with a zero clock.
pub fn train(config: &TrainConfig, env: &dyn Environment) -> Result<TrainOutcome> {
    train_with_clock(config, env, &mut || 0)
}

/// Runs GRPO training; `clock` returns elapsed milliseconds for the log.
///
/// Each step samples a group per query from the current policy, computes
/// advantages with the configured combiner, then takes `inner_epochs`
/// gradient-ascent steps on the batch-mean clipped surrogate against the
/// pre-step policy. Everything is a function of `config.seed`.
pub fn train_with_clock(
    config: &TrainConfig,
    env: &dyn Environment,
    clock: &mut dyn FnMut() -> u64,
) -> Result<TrainOutcome> {
    train_from(config, env, config.initial_policy()?, clock)
}

/// [`train_with_clock`] starting from `policy` instead of the uniform table.
pub fn train_from(
    config: &TrainConfig,
    env: &dyn Environment,
    mut policy: PolicyTable,
    clock: &mut dyn FnMut() -> u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    let shape = config.initial_policy()?;
    if (policy.num_queries(), policy.vocab_size(), policy.max_length())
        != (shape.num_queries(), shape.vocab_size(), shape.max_length())
    {
        return Err(Error::DimensionMismatch {
            axis: Axis::Sequence,
            expected: shape.logits().len(),
            found: policy.logits().len(),
        });
    }
    let n = env.num_objectives();
    if config.weights.len() != n {
        return Err(Error::DimensionMismatch {
            axis: Axis::Weights,
            expected: n,
            found: config.weights.len(),
        });
    }
    let mut records = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let (reward_mean, reward_std) = reward_moments(&policy, &config.queries, env)?;
        let step_seed = derive_seed(config.seed, step as u64);
        let mut rollouts = Vec::with_capacity(config.queries.len());
        let mut groups = Vec::with_capacity(config.queries.len());
        for (i, &query) in config.queries.iter().enumerate() {
            let sampled = sample_group(&policy, query, config.group_size, env, derive_seed(step_seed, i as u64))?;
            groups.push(group_of(query, &sampled, n)?);
            rollouts.push(sampled);
        }

        let bundles = batch_advantages(&groups, &config.weights, config.combiner)?;
        let paired_rc = batch_advantages(&groups, &config.weights, Method::RewardCombination)?;
        let paired_dvao = batch_advantages(&groups, &config.weights, Method::Dvao)?;

        let inputs: Vec<GroupInput<'_>> = config
            .queries
            .iter()
            .zip(&rollouts)
            .zip(&bundles)
            .map(|((&query, r), b)| GroupInput {
                query,
                rollouts: r,
                advantages: &b.combined,
            })
            .collect();
        let mut surrogate = None;
        for _ in 0..config.inner_epochs {
            let s = batch_surrogate(&policy, &inputs, config.clip_epsilon)?;
            surrogate.get_or_insert(s.objective);
            if config.learning_rate != 0.0 {
                for (z, g) in policy.logits_mut().iter_mut().zip(&s.gradient) {
                    *z += config.learning_rate * g;
                }
            }
        }

        let total_rollouts = rollouts.iter().map(Vec::len).sum::<usize>() as f64;
        records.push(RunRecord {
            step,
            reward_mean,
            reward_std,
            mean_abs_advantage: mean_abs(bundles.iter().flat_map(|b| b.combined.iter().copied())),
            mean_length: rollouts.iter().flatten().map(|r| r.len() as f64).sum::<f64>() / total_rollouts,
            surrogate: surrogate.unwrap_or(0.0),
            millis: clock(),
            paired_abs_rc: mean_abs(paired_rc.iter().flat_map(|b| b.combined.iter().copied())),
            paired_abs_dvao: mean_abs(paired_dvao.iter().flat_map(|b| b.combined.iter().copied())),
            degenerate_groups: bundles.iter().filter(|b| b.degenerate).count(),
        });

        if let Some(index) = policy.first_non_finite() {
            return Ok(TrainOutcome {
                records,
                policy,
                abort: Some(Error::Diverged { step, index }),
            });
        }
    }
    Ok(TrainOutcome {
        records,
        policy,
        abort: None,
    })
}

/// Exact expected rewards of `policy` for `query`, by enumerating every sequence.
pub fn expected_rewards(policy: &PolicyTable, query: QueryId, env: &dyn Environment) -> Result<Vec<f64>> {
    let q = policy.query_index(query)?;
    let mut out = vec![0.0; env.num_objectives()];
    for (tokens, p) in policy.enumerate(q) {
        for (acc, r) in out.iter_mut().zip(env.expected_rewards(query, &tokens)) {
            *acc += p * r;
        }
    }
    Ok(out)
}

/// Per objective, the exact mean and standard deviation of the reward under
/// `policy`, each averaged over `queries`.
pub fn reward_moments(
    policy: &PolicyTable,
    queries: &[QueryId],
    env: &dyn Environment,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if queries.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = env.num_objectives();
    let scale = 1.0 / queries.len() as f64;
    let (mut mean, mut std) = (vec![0.0; n], vec![0.0; n]);
    for &query in queries {
        let q = policy.query_index(query)?;
        let (mut first, mut second) = (vec![0.0; n], vec![0.0; n]);
        for (tokens, p) in policy.enumerate(q) {
            for (acc, r) in first.iter_mut().zip(env.expected_rewards(query, &tokens)) {
                *acc += p * r;
            }
            for (acc, r) in second.iter_mut().zip(env.expected_squared_rewards(query, &tokens)) {
                *acc += p * r;
            }
        }
        for k in 0..n {
            mean[k] += scale * first[k];
            std[k] += scale * libm::sqrt((second[k] - first[k] * first[k]).max(0.0));
        }
    }
    Ok((mean, std))
}

/// [`expected_rewards`] averaged over `queries`.
pub fn expected_batch_rewards(policy: &PolicyTable, queries: &[QueryId], env: &dyn Environment) -> Result<Vec<f64>> {
    if queries.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut out = vec![0.0; env.num_objectives()];
    for &q in queries {
        for (acc, r) in out.iter_mut().zip(expected_rewards(policy, q, env)?) {
            *acc += r / queries.len() as f64;
        }
    }
    Ok(out)
}
