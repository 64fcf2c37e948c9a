use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use super::env::Environment;
use super::policy::{PolicyTable, Symbol, STOP};
use crate::error::Result;
use crate::rng::{derive_seed, StreamRng};
use crate::stats::QueryId;

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub tokens: Vec<Symbol>,
    /// `log π_old(y_t | x, t)` for each token, recorded at sampling time.
    pub old_logprobs: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn draw(dist: &[f64], u: f64) -> Symbol {
    let mut acc = 0.0;
    for (symbol, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return symbol;
        }
    }
    // u landed in the rounding gap above the last partial sum.
    dist.len() - 1
}

/// Samples `group_size` sequences for `query`. Tokens come from a stream
/// seeded with `seed`; reward noise from a second stream mixing in the
/// environment's noise seed.
pub fn sample_group(
    policy: &PolicyTable,
    query: QueryId,
    group_size: usize,
    env: &dyn Environment,
    seed: u64,
) -> Result<Vec<Rollout>> {
    let q = policy.query_index(query)?;
    let mut token_rng = StreamRng::seed_from_u64(seed);
    let mut reward_rng = StreamRng::seed_from_u64(derive_seed(seed, env.noise_seed()));
    let log_dists: Vec<Vec<f64>> = (0..policy.max_length())
        .map(|t| policy.log_distribution(q, t))
        .collect();
    let dists: Vec<Vec<f64>> = log_dists
        .iter()
        .map(|row| row.iter().map(|&l| libm::exp(l)).collect())
        .collect();
    let mut out = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let mut tokens = Vec::with_capacity(policy.max_length());
        let mut old_logprobs = Vec::with_capacity(policy.max_length());
        for t in 0..policy.max_length() {
            let symbol = draw(&dists[t], token_rng.gen::<f64>());
            tokens.push(symbol);
            old_logprobs.push(log_dists[t][symbol]);
            if symbol == STOP {
                break;
            }
        }
        let rewards = env.rewards(query, &tokens, &mut reward_rng);
        out.push(Rollout {
            tokens,
            old_logprobs,
            rewards,
        });
    }
    Ok(out)
}
