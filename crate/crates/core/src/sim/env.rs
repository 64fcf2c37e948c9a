use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::policy::{Symbol, STOP};
use crate::stats::QueryId;

/// Maps a finished sequence to one reward per objective, each in `[0, 1]`.
pub trait Environment {
    fn num_objectives(&self) -> usize;

    /// Mixed into the sampling seed to give reward noise its own stream.
    fn noise_seed(&self) -> u64 {
        0
    }

    /// One draw of the rewards for `tokens`.
    fn rewards(&self, query: QueryId, tokens: &[Symbol], rng: &mut dyn RngCore) -> Vec<f64>;

    /// Rewards averaged over the environment's own noise.
    fn expected_rewards(&self, query: QueryId, tokens: &[Symbol]) -> Vec<f64>;

    /// `E[r_k²]` over the environment's noise. The default assumes none.
    fn expected_squared_rewards(&self, query: QueryId, tokens: &[Symbol]) -> Vec<f64> {
        self.expected_rewards(query, tokens)
            .into_iter()
            .map(|r| r * r)
            .collect()
    }
}

/// Built-in two-objective environments. Objective 1 is always "the sequence
/// contains the query's target symbol".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToyKind {
    /// Objective 2 is 1 when the sequence length is at most `length_target`.
    AccuracyLength { length_target: usize },
    /// Objective 2 is `clamp(objective 1 + u)` with `u ~ U[-noise_scale, noise_scale]`.
    Correlated { noise_scale: f64 },
    /// Objective 2 is the fixed `value`.
    AccuracyConstant { value: f64 },
    /// Both objectives are fixed.
    Constant { values: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEnv {
    pub kind: ToyKind,
    pub vocab_size: usize,
    pub noise_seed: u64,
}

impl ToyEnv {
    pub fn new(kind: ToyKind, vocab_size: usize, noise_seed: u64) -> Self {
        Self {
            kind,
            vocab_size,
            noise_seed,
        }
    }

    /// Target symbol for `query`; never [`STOP`].
    pub fn target_symbol(&self, query: QueryId) -> Symbol {
        1 + (query.0 % (self.vocab_size as u64 - 1)) as Symbol
    }

    fn accuracy(&self, query: QueryId, tokens: &[Symbol]) -> f64 {
        let target = self.target_symbol(query);
        if tokens.contains(&target) {
            1.0
        } else {
            0.0
        }
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `E[clamp(x + u, 0, 1)^p]` for `u ~ U[-s, s]`, `p` in {1, 2}.
fn expected_clamped_uniform(x: f64, s: f64, p: i32) -> f64 {
    if s <= 0.0 {
        return libm::pow(clamp01(x), p as f64);
    }
    // Antiderivative of clamp(v, 0, 1)^p.
    let h = |v: f64| {
        if v <= 0.0 {
            0.0
        } else if v <= 1.0 {
            libm::pow(v, (p + 1) as f64) / (p + 1) as f64
        } else {
            1.0 / (p + 1) as f64 + (v - 1.0)
        }
    };
    (h(x + s) - h(x - s)) / (2.0 * s)
}

impl Environment for ToyEnv {
    fn num_objectives(&self) -> usize {
        2
    }

    fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    fn rewards(&self, query: QueryId, tokens: &[Symbol], rng: &mut dyn RngCore) -> Vec<f64> {
        let acc = self.accuracy(query, tokens);
        match self.kind {
            ToyKind::Correlated { noise_scale } if noise_scale > 0.0 => {
                let u: f64 = rng.gen_range(-noise_scale..=noise_scale);
                vec![acc, clamp01(acc + u)]
            }
            _ => self.expected_rewards(query, tokens),
        }
    }

    fn expected_rewards(&self, query: QueryId, tokens: &[Symbol]) -> Vec<f64> {
        let acc = self.accuracy(query, tokens);
        match self.kind {
            ToyKind::AccuracyLength { length_target } => {
                vec![acc, if tokens.len() <= length_target { 1.0 } else { 0.0 }]
            }
            ToyKind::Correlated { noise_scale } => vec![acc, expected_clamped_uniform(acc, noise_scale, 1)],
            ToyKind::AccuracyConstant { value } => vec![acc, clamp01(value)],
            ToyKind::Constant { values } => vec![clamp01(values[0]), clamp01(values[1])],
        }
    }

    fn expected_squared_rewards(&self, query: QueryId, tokens: &[Symbol]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .expected_rewards(query, tokens)
            .into_iter()
            .map(|r| r * r)
            .collect();
        if let ToyKind::Correlated { noise_scale } = self.kind {
            out[1] = expected_clamped_uniform(out[0], noise_scale, 2);
        }
        out
    }
}

/// True when `tokens` is a well-formed sequence for a policy with `max_length`.
pub fn is_terminal(tokens: &[Symbol], max_length: usize) -> bool {
    !tokens.is_empty()
        && tokens.len() <= max_length
        && (tokens.last() == Some(&STOP) || tokens.len() == max_length)
        && !tokens[..tokens.len() - 1].contains(&STOP)
}
