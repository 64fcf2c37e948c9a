//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown or repeated keys are errors. [`RunConfig::to_text`]
//! writes every key in a fixed order, and that text is what gets hashed.

use std::fmt::Write as _;
use std::str::FromStr;

use dvao_core::analysis::{SensitivitySuiteConfig, SuiteConfig};
use dvao_core::rng::derive_seed;
use dvao_core::sim::{ToyEnv, ToyKind, TrainConfig, DEFAULT_GRID};
use dvao_core::{Deviation, Method, QueryId, WeightVector};

use crate::error::CliError;
use crate::formats::float;

/// Every key accepted in a config file, in output order.
pub const KEYS: &[&str] = &[
    "combiner",
    "weights",
    "group_size",
    "clip_epsilon",
    "learning_rate",
    "steps",
    "queries",
    "seed",
    "inner_epochs",
    "vocab_size",
    "max_length",
    "env",
    "env.length_target",
    "env.noise_scale",
    "env.value",
    "env.values",
    "env.noise_seed",
    "sweep.grid",
    "sweep.combiners",
    "verify.cases",
    "verify.seed",
    "verify.sensitivity_cases",
    "sensitivity.step",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    AccuracyLength,
    Correlated,
    AccuracyConstant,
    Constant,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::AccuracyLength => "accuracy_length",
            EnvKind::Correlated => "correlated",
            EnvKind::AccuracyConstant => "accuracy_constant",
            EnvKind::Constant => "constant",
        }
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "accuracy_length" => Ok(EnvKind::AccuracyLength),
            "correlated" => Ok(EnvKind::Correlated),
            "accuracy_constant" => Ok(EnvKind::AccuracyConstant),
            "constant" => Ok(EnvKind::Constant),
            _ => Err("expected one of accuracy_length, correlated, accuracy_constant, constant".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub length_target: usize,
    pub noise_scale: f64,
    pub value: f64,
    pub values: [f64; 2],
    pub noise_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            kind: EnvKind::AccuracyLength,
            length_target: 2,
            noise_scale: 0.3,
            value: 0.5,
            values: [0.5, 0.5],
            noise_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub env: EnvConfig,
    pub sweep_grid: Vec<f64>,
    pub sweep_combiners: Vec<Method>,
    pub verify_cases: usize,
    pub verify_seed: u64,
    pub sensitivity_cases: usize,
    pub sensitivity_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let suite = SuiteConfig::default();
        let sens = SensitivitySuiteConfig::default();
        Self {
            train: TrainConfig::default(),
            env: EnvConfig::default(),
            sweep_grid: DEFAULT_GRID.to_vec(),
            sweep_combiners: Method::ALL.to_vec(),
            verify_cases: suite.cases,
            verify_seed: suite.seed,
            sensitivity_cases: sens.cases,
            sensitivity_step: sens.step,
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn positive(key: &str, value: usize) -> Result<usize, CliError> {
    if value == 0 {
        return Err(bad(key, "must be positive"));
    }
    Ok(value)
}

fn positive_f64(key: &str, value: f64) -> Result<f64, CliError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(bad(key, "must be a positive finite number"));
    }
    Ok(value)
}

fn unit_interval(key: &str, value: f64) -> Result<f64, CliError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(bad(key, "must lie in [0, 1]"));
    }
    Ok(value)
}

fn parse_combiner(key: &str, value: &str) -> Result<Method, CliError> {
    value
        .parse()
        .map_err(|e: dvao_core::combiners::UnknownMethod| bad(key, e.to_string()))
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn join_floats(items: &[f64]) -> String {
    items.iter().map(|&x| float(x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad(line, format!("line {}: expected `key = value`", number + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(bad(key, format!("line {}: unknown key", number + 1)));
            };
            if seen.contains(&known) {
                return Err(bad(key, format!("line {}: repeated key", number + 1)));
            }
            seen.push(known);
            config.set(known, value)?;
        }
        config.check()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let t = &mut self.train;
        match key {
            "combiner" => t.combiner = parse_combiner(key, value)?,
            "weights" => {
                let w = parse_list(key, value)?;
                t.weights = WeightVector::new(w).map_err(|e| bad(key, e.to_string()))?;
            }
            "group_size" => {
                t.group_size = parse_num(key, value)?;
                if t.group_size < 2 {
                    return Err(bad(key, "must be at least 2"));
                }
            }
            "clip_epsilon" => t.clip_epsilon = positive_f64(key, parse_num(key, value)?)?,
            "learning_rate" => {
                t.learning_rate = parse_num(key, value)?;
                if !(t.learning_rate >= 0.0) || !t.learning_rate.is_finite() {
                    return Err(bad(key, "must be finite and non-negative"));
                }
            }
            "steps" => t.steps = parse_num(key, value)?,
            "queries" => {
                let ids: Vec<u64> = parse_list(key, value)?;
                if ids.is_empty() {
                    return Err(bad(key, "need at least one query id"));
                }
                t.queries = ids.into_iter().map(QueryId).collect();
            }
            "seed" => t.seed = parse_num(key, value)?,
            "inner_epochs" => t.inner_epochs = positive(key, parse_num(key, value)?)?,
            "vocab_size" => {
                t.vocab_size = parse_num(key, value)?;
                if t.vocab_size < 2 {
                    return Err(bad(key, "must be at least 2"));
                }
            }
            "max_length" => t.max_length = positive(key, parse_num(key, value)?)?,
            "env" => self.env.kind = value.parse().map_err(|e: String| bad(key, e))?,
            "env.length_target" => self.env.length_target = parse_num(key, value)?,
            "env.noise_scale" => {
                self.env.noise_scale = parse_num(key, value)?;
                if !(self.env.noise_scale >= 0.0) || !self.env.noise_scale.is_finite() {
                    return Err(bad(key, "must be finite and non-negative"));
                }
            }
            "env.value" => self.env.value = unit_interval(key, parse_num(key, value)?)?,
            "env.values" => {
                let v: Vec<f64> = parse_list(key, value)?;
                let [a, b] = v[..] else {
                    return Err(bad(key, "need exactly two values"));
                };
                self.env.values = [unit_interval(key, a)?, unit_interval(key, b)?];
            }
            "env.noise_seed" => self.env.noise_seed = parse_num(key, value)?,
            "sweep.grid" => {
                let grid: Vec<f64> = parse_list(key, value)?;
                if grid.is_empty() || grid.iter().any(|&w| !(w > 0.0 && w < 1.0)) {
                    return Err(bad(key, "need one or more weights strictly between 0 and 1"));
                }
                self.sweep_grid = grid;
            }
            "sweep.combiners" => {
                let methods = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_combiner(key, s))
                    .collect::<Result<Vec<_>, _>>()?;
                if methods.is_empty() {
                    return Err(bad(key, "need at least one combiner"));
                }
                self.sweep_combiners = methods;
            }
            "verify.cases" => self.verify_cases = positive(key, parse_num(key, value)?)?,
            "verify.seed" => self.verify_seed = parse_num(key, value)?,
            "verify.sensitivity_cases" => self.sensitivity_cases = positive(key, parse_num(key, value)?)?,
            "sensitivity.step" => {
                self.sensitivity_step = positive_f64(key, parse_num(key, value)?)?;
                if self.sensitivity_step < dvao_core::tol::FD_MIN_STEP {
                    return Err(bad(key, "must be at least 1e-12"));
                }
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks that span several keys.
    pub fn check(&self) -> Result<(), CliError> {
        if self.train.weights.len() != 2 {
            return Err(bad("weights", "the built-in environments have two objectives"));
        }
        if self.env.kind == EnvKind::AccuracyLength && self.env.length_target == 0 {
            return Err(bad("env.length_target", "must be positive"));
        }
        self.train.validate().map_err(|e| match e {
            dvao_core::Error::InvalidParameter { name, reason } => bad(name, reason),
            dvao_core::Error::GroupTooSmall(_) => bad("group_size", "must be at least 2"),
            other => bad("config", other.to_string()),
        })
    }

    pub fn environment(&self) -> ToyEnv {
        let kind = match self.env.kind {
            EnvKind::AccuracyLength => ToyKind::AccuracyLength {
                length_target: self.env.length_target,
            },
            EnvKind::Correlated => ToyKind::Correlated {
                noise_scale: self.env.noise_scale,
            },
            EnvKind::AccuracyConstant => ToyKind::AccuracyConstant { value: self.env.value },
            EnvKind::Constant => ToyKind::Constant {
                values: self.env.values,
            },
        };
        ToyEnv::new(kind, self.train.vocab_size, self.env.noise_seed)
    }

    pub fn suite_config(&self, deviation: Deviation) -> SuiteConfig {
        SuiteConfig {
            cases: self.verify_cases,
            seed: self.verify_seed,
            deviation,
            ..SuiteConfig::default()
        }
    }

    pub fn sensitivity_suite_config(&self) -> SensitivitySuiteConfig {
        SensitivitySuiteConfig {
            cases: self.sensitivity_cases,
            seed: self.sensitivity_seed(),
            step: self.sensitivity_step,
            ..SensitivitySuiteConfig::default()
        }
    }

    pub fn sensitivity_seed(&self) -> u64 {
        derive_seed(self.verify_seed, 3)
    }

    /// `(key, value)` for every key, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let queries: Vec<u64> = t.queries.iter().map(|q| q.0).collect();
        let combiners: Vec<&str> = self.sweep_combiners.iter().map(|m| m.name()).collect();
        KEYS.iter()
            .map(|&key| {
                let value = match key {
                    "combiner" => t.combiner.name().to_string(),
                    "weights" => join_floats(t.weights.as_slice()),
                    "group_size" => t.group_size.to_string(),
                    "clip_epsilon" => float(t.clip_epsilon),
                    "learning_rate" => float(t.learning_rate),
                    "steps" => t.steps.to_string(),
                    "queries" => join(&queries),
                    "seed" => t.seed.to_string(),
                    "inner_epochs" => t.inner_epochs.to_string(),
                    "vocab_size" => t.vocab_size.to_string(),
                    "max_length" => t.max_length.to_string(),
                    "env" => self.env.kind.name().to_string(),
                    "env.length_target" => self.env.length_target.to_string(),
                    "env.noise_scale" => float(self.env.noise_scale),
                    "env.value" => float(self.env.value),
                    "env.values" => join_floats(&self.env.values),
                    "env.noise_seed" => self.env.noise_seed.to_string(),
                    "sweep.grid" => join_floats(&self.sweep_grid),
                    "sweep.combiners" => combiners.join(","),
                    "verify.cases" => self.verify_cases.to_string(),
                    "verify.seed" => self.verify_seed.to_string(),
                    "verify.sensitivity_cases" => self.sensitivity_cases.to_string(),
                    "sensitivity.step" => float(self.sensitivity_step),
                    _ => unreachable!("KEYS and entries() list the same keys"),
                };
                (key, value)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}
