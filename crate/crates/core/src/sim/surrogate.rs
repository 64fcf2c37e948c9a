//! Clipped importance-weighted surrogate and its exact gradient for the
//! tabular softmax policy.
//!
//! For one group,
//!
//! ```text
//! J = (1/G) Σ_j (1/|y_j|) Σ_t min(s_jt A_j, clip(s_jt, 1-ε, 1+ε) A_j),
//! s_jt = π(y_jt | x, t) / π_old(y_jt | x, t)
//! ```
//!
//! Where the unclipped branch is the minimum the token contributes
//! `A_j s_jt ∇ log π(y_jt | x, t)` to the gradient; where the clipped branch
//! is strictly smaller the token contributes nothing. No KL term.

use alloc::vec;
use alloc::vec::Vec;

use super::policy::PolicyTable;
use super::rollout::Rollout;
use crate::error::{Axis, Error, Result};
use crate::stats::QueryId;

/// One group's worth of surrogate inputs.
#[derive(Debug, Clone, Copy)]
pub struct GroupInput<'a> {
    pub query: QueryId,
    pub rollouts: &'a [Rollout],
    pub advantages: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub objective: f64,
    /// Same layout as [`PolicyTable::logits`].
    pub gradient: Vec<f64>,
    /// Tokens whose clipped branch was strictly smaller.
    pub clipped_tokens: usize,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "clip_epsilon",
            reason: "must be positive",
        });
    }
    Ok(())
}

fn accumulate(
    policy: &PolicyTable,
    input: &GroupInput<'_>,
    epsilon: f64,
    scale: f64,
    out: &mut Surrogate,
) -> Result<()> {
    let q = policy.query_index(input.query)?;
    if input.rollouts.len() != input.advantages.len() {
        return Err(Error::DimensionMismatch {
            axis: Axis::Sequence,
            expected: input.rollouts.len(),
            found: input.advantages.len(),
        });
    }
    let g = input.rollouts.len() as f64;
    let log_dists: Vec<Vec<f64>> = (0..policy.max_length())
        .map(|t| policy.log_distribution(q, t))
        .collect();
    for (rollout, &advantage) in input.rollouts.iter().zip(input.advantages) {
        if rollout.old_logprobs.len() != rollout.tokens.len() {
            return Err(Error::DimensionMismatch {
                axis: Axis::Sequence,
                expected: rollout.tokens.len(),
                found: rollout.old_logprobs.len(),
            });
        }
        if rollout.tokens.is_empty() || rollout.tokens.len() > policy.max_length() {
            return Err(Error::DimensionMismatch {
                axis: Axis::Sequence,
                expected: policy.max_length(),
                found: rollout.tokens.len(),
            });
        }
        let weight = scale / (g * rollout.len() as f64);
        for (t, (&y, &old)) in rollout.tokens.iter().zip(&rollout.old_logprobs).enumerate() {
            let log_dist = &log_dists[t];
            let ratio = libm::exp(log_dist[y] - old);
            let unclipped = ratio * advantage;
            let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
            if unclipped <= clipped {
                out.objective += weight * unclipped;
                let coeff = weight * unclipped;
                if coeff != 0.0 {
                    let base = policy.offset(q, t, 0);
                    for (v, &lp) in log_dist.iter().enumerate() {
                        let indicator = if v == y { 1.0 } else { 0.0 };
                        out.gradient[base + v] += coeff * (indicator - libm::exp(lp));
                    }
                }
            } else {
                out.objective += weight * clipped;
                out.clipped_tokens += 1;
            }
        }
    }
    Ok(())
}

/// Surrogate objective and gradient for a single group.
pub fn clipped_surrogate(
    policy: &PolicyTable,
    query: QueryId,
    rollouts: &[Rollout],
    advantages: &[f64],
    epsilon: f64,
) -> Result<Surrogate> {
    batch_surrogate(
        policy,
        &[GroupInput {
            query,
            rollouts,
            advantages,
        }],
        epsilon,
    )
}

/// Mean of the per-group surrogates over a batch.
pub fn batch_surrogate(policy: &PolicyTable, groups: &[GroupInput<'_>], epsilon: f64) -> Result<Surrogate> {
    check_epsilon(epsilon)?;
    if groups.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut out = Surrogate {
        objective: 0.0,
        gradient: vec![0.0; policy.logits().len()],
        clipped_tokens: 0,
    };
    let scale = 1.0 / groups.len() as f64;
    for input in groups {
        accumulate(policy, input, epsilon, scale, &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sim::env::{ToyEnv, ToyKind};
    use crate::sim::rollout::sample_group;
    use rand::Rng;

    fn setup() -> (PolicyTable, Vec<Rollout>) {
        let mut p = PolicyTable::new(1, 3, 2).unwrap();
        let mut r = rng::stream(4, 4);
        for z in p.logits_mut() {
            *z = r.gen_range(-1.0..1.0);
        }
        let env = ToyEnv::new(ToyKind::AccuracyLength { length_target: 1 }, 3, 0);
        let rollouts = sample_group(&p, QueryId(0), 5, &env, 12).unwrap();
        (p, rollouts)
    }

    #[test]
    fn ratio_one_reduces_to_mean_advantage_and_reinforce() {
        let (p, rollouts) = setup();
        let adv = [0.5, -1.0, 2.0, 0.25, -0.75];
        let s = clipped_surrogate(&p, QueryId(0), &rollouts, &adv, 0.2).unwrap();
        let mean: f64 = adv.iter().sum::<f64>() / adv.len() as f64;
        assert!((s.objective - mean).abs() < 1e-12);

        // (1/G) Σ_j (A_j/|y_j|) Σ_t ∇ log π(y_jt)
        let mut reinforce = vec![0.0; p.logits().len()];
        for (r, a) in rollouts.iter().zip(adv) {
            for (t, &y) in r.tokens.iter().enumerate() {
                let d = p.distribution(0, t);
                for v in 0..3 {
                    let ind = if v == y { 1.0 } else { 0.0 };
                    reinforce[p.offset(0, t, v)] += a / (5.0 * r.len() as f64) * (ind - d[v]);
                }
            }
        }
        for (x, y) in s.gradient.iter().zip(&reinforce) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_advantages_give_zero() {
        let (p, rollouts) = setup();
        let s = clipped_surrogate(&p, QueryId(0), &rollouts, &[0.0; 5], 0.2).unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(s.gradient.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn clipping_zeroes_the_gradient() {
        let (mut p, rollouts) = setup();
        // Push every sampled token's probability far up: ratios exceed 1 + ε.
        for r in &rollouts {
            for (t, &y) in r.tokens.iter().enumerate() {
                let i = p.offset(0, t, y);
                p.logits_mut()[i] += 5.0;
            }
        }
        let s = clipped_surrogate(&p, QueryId(0), &rollouts, &[1.0; 5], 0.2).unwrap();
        assert!(s.clipped_tokens > 0);
    }

    #[test]
    fn shape_errors() {
        let (p, rollouts) = setup();
        assert!(matches!(
            clipped_surrogate(&p, QueryId(0), &rollouts, &[0.0; 4], 0.2),
            Err(Error::DimensionMismatch {
                axis: Axis::Sequence,
                expected: 5,
                found: 4
            })
        ));
        let mut broken = rollouts.clone();
        broken[0].old_logprobs.push(0.0);
        assert!(clipped_surrogate(&p, QueryId(0), &broken, &[0.0; 5], 0.2).is_err());
        assert!(clipped_surrogate(&p, QueryId(0), &rollouts, &[0.0; 5], 0.0).is_err());
        assert!(batch_surrogate(&p, &[], 0.2).is_err());
    }
}
