use core::fmt;

/// Which dimension of an input was malformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Rollouts within a group (`G`).
    Rollouts,
    /// Reward objectives (`n`).
    Objectives,
    /// Entries of a weight vector.
    Weights,
    /// Per-rollout vectors such as advantages or log-probabilities.
    Sequence,
    /// Query ids known to a policy table.
    Queries,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Rollouts => "rollouts",
            Axis::Objectives => "objectives",
            Axis::Weights => "weights",
            Axis::Sequence => "sequence",
            Axis::Queries => "queries",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch along {axis}: expected {expected}, found {found}")]
    DimensionMismatch { axis: Axis, expected: usize, found: usize },
    #[error("a rollout group needs at least 2 rollouts, got {0}")]
    GroupTooSmall(usize),
    #[error("at least one objective is required")]
    NoObjectives,
    #[error("reward ({row}, {col}) = {value} lies outside [0, 1]")]
    RewardOutOfRange { row: usize, col: usize, value: f64 },
    #[error("weight {index} = {value} lies outside [0, 1]")]
    WeightOutOfRange { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("{axis} index {index} out of bounds (len {len})")]
    IndexOutOfBounds { axis: Axis, index: usize, len: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("bundle {index} was produced by {found}, expected advantage combination")]
    WrongMethod { index: usize, found: crate::Method },
    #[error("finite-difference step {0} is below the minimum 1e-12")]
    StepTooSmall(f64),
    #[error("training diverged at step {step}: parameter {index} is not finite")]
    Diverged { step: usize, index: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;
