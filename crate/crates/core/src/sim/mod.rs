//! Desk-scale GRPO training loop.
//!
//! A tabular softmax policy over a small vocabulary emits short sequences,
//! a two-objective toy environment scores them, any combiner turns the
//! rewards into advantages, and plain gradient ascent on the clipped
//! surrogate updates the table. Expected rewards are computed exactly by
//! enumerating every sequence.

pub mod env;
pub mod gradcheck;
pub mod policy;
pub mod rollout;
pub mod surrogate;
pub mod sweep;
pub mod train;

pub use env::{Environment, ToyEnv, ToyKind};
pub use gradcheck::{
    clip_boundary_distance, gradient_check_suite, gradient_rel_error, numeric_gradient, GradientCase,
    GradientCheckConfig, GradientCheckReport, GRADIENT_TOLERANCE,
};
pub use policy::{PolicyTable, Symbol, STOP};
pub use rollout::{sample_group, Rollout};
pub use surrogate::{batch_surrogate, clipped_surrogate, GroupInput, Surrogate};
pub use sweep::{pareto_sweep, SweepRow, DEFAULT_GRID};
pub use train::{
    batch_advantages, expected_batch_rewards, expected_rewards, reward_moments, train, train_from, train_with_clock,
    RunRecord, TrainConfig, TrainOutcome,
};
