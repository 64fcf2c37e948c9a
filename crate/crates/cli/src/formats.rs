//! CSV layouts and the reward-group fixture format.

use std::path::Path;

use dvao_core::sim::{RunRecord, SweepRow};
use dvao_core::{QueryId, RewardGroup, WeightVector};
use serde::Deserialize;

use crate::error::CliError;

pub const TRAIN_CSV: &str = "train.csv";
pub const PAIRED_CSV: &str = "paired.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const TRAIN_CSV_SCHEMA_VERSION: u32 = 1;
pub const PAIRED_CSV_SCHEMA_VERSION: u32 = 1;
pub const SWEEP_CSV_SCHEMA_VERSION: u32 = 1;

pub const SWEEP_HEADER: [&str; 5] = ["combiner", "w1", "exp_reward_1", "exp_reward_2", "seed"];
pub const PAIRED_HEADER: [&str; 4] = ["step", "paired_abs_rc", "paired_abs_dvao", "degenerate_groups"];

/// `step, reward_mean_1, reward_std_1, ..., mean_abs_advantage, mean_length, surrogate, millis`.
pub fn train_header(objectives: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    for k in 1..=objectives {
        h.push(format!("reward_mean_{k}"));
        h.push(format!("reward_std_{k}"));
    }
    h.extend(["mean_abs_advantage", "mean_length", "surrogate", "millis"].map(String::from));
    h
}

/// Shortest round-trip form, with an exponent for very small or large values.
pub fn float(x: f64) -> String {
    format!("{x:?}")
}

fn csv_bytes<I, R>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing to a Vec cannot fail.
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn train_csv(records: &[RunRecord], objectives: usize) -> Vec<u8> {
    csv_bytes(
        &train_header(objectives),
        records.iter().map(|r| {
            let mut row = vec![r.step.to_string()];
            for (m, s) in r.reward_mean.iter().zip(&r.reward_std) {
                row.push(float(*m));
                row.push(float(*s));
            }
            row.extend([
                float(r.mean_abs_advantage),
                float(r.mean_length),
                float(r.surrogate),
                r.millis.to_string(),
            ]);
            row
        }),
    )
}

pub fn paired_csv(records: &[RunRecord]) -> Vec<u8> {
    csv_bytes(
        &PAIRED_HEADER.map(String::from),
        records.iter().map(|r| {
            [
                r.step.to_string(),
                float(r.paired_abs_rc),
                float(r.paired_abs_dvao),
                r.degenerate_groups.to_string(),
            ]
        }),
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    csv_bytes(
        &SWEEP_HEADER.map(String::from),
        rows.iter().map(|r| {
            [
                r.combiner.name().to_string(),
                float(r.w1),
                float(r.exp_reward_1),
                float(r.exp_reward_2),
                r.seed.to_string(),
            ]
        }),
    )
}

/// A stored rollout group: one row of rewards per rollout, optional weights.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFixture {
    #[serde(default)]
    pub query_id: u64,
    pub rewards: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl GroupFixture {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn group(&self) -> Result<RewardGroup, CliError> {
        Ok(RewardGroup::from_rows(QueryId(self.query_id), &self.rewards)?)
    }

    /// The fixture's weights, or uniform weights when it has none.
    pub fn weights(&self, objectives: usize) -> Result<WeightVector, CliError> {
        Ok(match &self.weights {
            Some(w) => WeightVector::new(w.clone())?,
            None => WeightVector::uniform(objectives)?,
        })
    }
}
