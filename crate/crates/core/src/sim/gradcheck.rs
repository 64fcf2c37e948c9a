//! Parameter-space finite-difference check of the surrogate gradient.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use super::env::{ToyEnv, ToyKind};
use super::policy::PolicyTable;
use super::rollout::{sample_group, Rollout};
use super::surrogate::{batch_surrogate, GroupInput};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, StreamRng};
use crate::stats::QueryId;
use crate::tol;

/// Relative-error bound for the gradient check.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradientCheckConfig {
    pub cases: usize,
    pub seed: u64,
    pub group_size: usize,
    pub vocab_size: usize,
    pub max_length: usize,
    pub clip_epsilon: f64,
    pub step: f64,
    /// `θ` is `θ_old` plus uniform noise of this half-width.
    pub perturbation: f64,
    /// Instances with a ratio closer than this to `1 ± ε` are redrawn.
    pub boundary_margin: f64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self {
            cases: 100,
            seed: 0x5EED_D7A4,
            group_size: 3,
            vocab_size: 3,
            max_length: 2,
            clip_epsilon: 0.2,
            step: tol::FD_STEP,
            perturbation: 0.5,
            boundary_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GradientCase {
    pub case: usize,
    pub case_seed: u64,
    pub rel_error: f64,
    pub clipped_tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GradientCheckReport {
    pub seed: u64,
    pub cases: usize,
    /// Draws rejected for a ratio near a clip boundary.
    pub redraws: usize,
    /// Cases where at least one token took the clipped branch.
    pub cases_with_clipping: usize,
    pub tolerance: f64,
    pub failures: usize,
    pub worst: Option<GradientCase>,
    pub passed: bool,
}

/// Central differences of the batch surrogate objective over every logit.
pub fn numeric_gradient(policy: &PolicyTable, groups: &[GroupInput<'_>], epsilon: f64, h: f64) -> Result<Vec<f64>> {
    if !(h >= tol::FD_MIN_STEP) {
        return Err(Error::StepTooSmall(h));
    }
    let mut probe = policy.clone();
    let mut out = Vec::with_capacity(policy.logits().len());
    for i in 0..policy.logits().len() {
        let z = policy.logits()[i];
        probe.logits_mut()[i] = z + h;
        let up = batch_surrogate(&probe, groups, epsilon)?.objective;
        probe.logits_mut()[i] = z - h;
        let down = batch_surrogate(&probe, groups, epsilon)?.objective;
        probe.logits_mut()[i] = z;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `‖analytic − numeric‖∞ / max(‖analytic‖∞, 1e-8)`.
pub fn gradient_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic.iter().map(|a| a.abs()).fold(0.0, f64::max);
    diff / scale.max(tol::REL_FLOOR)
}

/// Smallest distance from any token ratio to either clip boundary.
pub fn clip_boundary_distance(policy: &PolicyTable, query: usize, rollouts: &[Rollout], epsilon: f64) -> f64 {
    rollouts
        .iter()
        .flat_map(|r| r.tokens.iter().zip(&r.old_logprobs).enumerate())
        .map(|(t, (&y, &old))| {
            let s = libm::exp(policy.log_prob(query, t, y) - old);
            (s - (1.0 - epsilon)).abs().min((s - (1.0 + epsilon)).abs())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random small instances: `θ_old` and rollouts from it, a perturbed `θ`,
/// random advantages; analytic vs central-difference gradient on each.
pub fn gradient_check_suite(config: &GradientCheckConfig) -> Result<GradientCheckReport> {
    if config.cases == 0 {
        return Err(Error::InvalidParameter {
            name: "cases",
            reason: "must be positive",
        });
    }
    if config.group_size < 2 {
        return Err(Error::GroupTooSmall(config.group_size));
    }
    let env = ToyEnv::new(ToyKind::AccuracyLength { length_target: 1 }, config.vocab_size, 0);
    let mut report = GradientCheckReport {
        seed: config.seed,
        cases: config.cases,
        redraws: 0,
        cases_with_clipping: 0,
        tolerance: GRADIENT_TOLERANCE,
        failures: 0,
        worst: None,
        passed: true,
    };
    for case in 0..config.cases {
        let case_seed = derive_seed(config.seed, case as u64);
        let mut r = StreamRng::seed_from_u64(case_seed);
        let (policy, rollouts, advantages) = loop {
            let mut old = PolicyTable::new(1, config.vocab_size, config.max_length)?;
            for z in old.logits_mut() {
                *z = r.gen_range(-1.0..1.0);
            }
            let rollouts = sample_group(&old, QueryId(0), config.group_size, &env, r.gen())?;
            let mut policy = old;
            for z in policy.logits_mut() {
                *z += r.gen_range(-config.perturbation..config.perturbation);
            }
            let advantages: Vec<f64> = (0..config.group_size).map(|_| r.gen_range(-2.0..2.0)).collect();
            if clip_boundary_distance(&policy, 0, &rollouts, config.clip_epsilon) > config.boundary_margin {
                break (policy, rollouts, advantages);
            }
            report.redraws += 1;
        };
        let groups = [GroupInput {
            query: QueryId(0),
            rollouts: &rollouts,
            advantages: &advantages,
        }];
        let analytic = batch_surrogate(&policy, &groups, config.clip_epsilon)?;
        let numeric = numeric_gradient(&policy, &groups, config.clip_epsilon, config.step)?;
        let rel_error = gradient_rel_error(&analytic.gradient, &numeric);
        if analytic.clipped_tokens > 0 {
            report.cases_with_clipping += 1;
        }
        if !(rel_error < GRADIENT_TOLERANCE) {
            report.failures += 1;
            report.passed = false;
        }
        let current = GradientCase {
            case,
            case_seed,
            rel_error,
            clipped_tokens: analytic.clipped_tokens,
        };
        let worse = match report.worst {
            None => true,
            Some(w) => !(rel_error <= w.rel_error) && !w.rel_error.is_nan(),
        };
        if worse {
            report.worst = Some(current);
        }
    }
    Ok(report)
}
