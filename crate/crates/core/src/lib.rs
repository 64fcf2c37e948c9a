//! Multi-reward group-relative advantage estimation.
//!
//! The crate covers four ways of turning a `G × n` block of per-rollout,
//! per-objective rewards into one advantage per rollout:
//!
//! - **Reward combination** (RC): convex-combine the raw rewards, then
//!   normalize the scalar within the group.
//! - **Advantage combination** (AC): normalize each objective within the
//!   group, then convex-combine the advantages.
//! - **GDPO**: advantage combination followed by a pooled normalization over
//!   every combined advantage in a training batch.
//! - **DVAO**: advantage combination with weights rescaled by each
//!   objective's in-group standard deviation, `w̃_k ∝ w_k σ_k`.
//!
//! On top of the combiners, [`analysis`] checks the magnitude and
//! sensitivity identities relating them (with an independent
//! finite-difference oracle), and [`sim`] runs a small tabular GRPO
//! training loop so the combiners can be compared end to end.
//!
//! The crate is `no_std` and needs only `alloc`. All statistics are
//! population statistics (divisor `G`).

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod combiners;
mod error;
mod matrix;
pub mod rng;
pub mod sim;
pub mod stats;

pub use combiners::{AdvantageBundle, AdvantageEstimator, Method};
pub use error::{Axis, Error, Result};
pub use matrix::Matrix;
pub use stats::{Deviation, GroupStats, QueryId, RewardGroup, WeightVector};

/// Library-wide numeric tolerances.
pub mod tol {
    /// Tolerance used when asserting identities and inequalities.
    pub const ASSERT: f64 = 1e-9;
    /// A standard deviation below this is treated as exactly zero.
    pub const DEGENERATE: f64 = 1e-12;
    /// Allowed deviation of a weight vector's sum from one.
    pub const WEIGHT_SUM: f64 = 1e-12;
    /// Floor on the denominator of relative-error comparisons.
    pub const REL_FLOOR: f64 = 1e-8;
    /// Default central-difference step.
    pub const FD_STEP: f64 = 1e-6;
    /// Smallest accepted finite-difference step.
    pub const FD_MIN_STEP: f64 = 1e-12;
}
