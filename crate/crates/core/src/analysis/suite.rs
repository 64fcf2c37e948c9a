//! Seeded randomized runs of the identity checks.
//!
//! Case `i` draws everything from its own stream seeded with
//! `derive_seed(master_seed, i)`, so any failing case can be replayed alone.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use super::{proposition1_check_with, proposition2_check_with, sensitivity_report, SensitivityMethod};
use crate::combiners::AdvantageEstimator;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, StreamRng};
use crate::stats::{Deviation, GroupStats, QueryId, RewardGroup, WeightVector};
use crate::tol;

/// Relative-error bound for the sensitivity suite.
pub const SENSITIVITY_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuiteConfig {
    pub cases: usize,
    pub seed: u64,
    /// Inclusive range of group sizes.
    pub group_size: (usize, usize),
    /// Inclusive range of objective counts.
    pub objectives: (usize, usize),
    /// Standard-deviation convention fed to the combiners.
    pub deviation: Deviation,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            cases: 10_000,
            seed: 0x5EED_D7A0,
            group_size: (2, 64),
            objectives: (2, 5),
            deviation: Deviation::Population,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensitivitySuiteConfig {
    pub cases: usize,
    pub seed: u64,
    /// Groups are redrawn until every `σ_k` exceeds this.
    pub sigma_floor: f64,
    pub group_size: (usize, usize),
    pub objectives: (usize, usize),
    pub step: f64,
}

impl Default for SensitivitySuiteConfig {
    fn default() -> Self {
        Self {
            cases: 1_000,
            seed: 0x5EED_D7A3,
            sigma_floor: 0.05,
            group_size: (4, 64),
            objectives: (2, 5),
            step: tol::FD_STEP,
        }
    }
}

/// The case that produced a criterion's worst value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Witness {
    pub case: usize,
    pub case_seed: u64,
    pub group_size: usize,
    pub objectives: usize,
    pub value: f64,
}

/// One pass/fail quantity tracked across a suite; passes when every case's
/// value is below `tolerance`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CriterionResult {
    pub name: &'static str,
    pub tolerance: f64,
    pub failures: usize,
    pub worst: Option<Witness>,
    pub passed: bool,
}

impl CriterionResult {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            failures: 0,
            worst: None,
            passed: true,
        }
    }

    fn record(&mut self, value: f64, witness: Witness) {
        // NaN counts as a failure and as the worst value.
        let fails = !(value < self.tolerance);
        if fails {
            self.failures += 1;
            self.passed = false;
        }
        let worse = match self.worst {
            None => true,
            Some(w) => value.is_nan() || value > w.value,
        };
        if worse && !self.worst.is_some_and(|w| w.value.is_nan()) {
            self.worst = Some(Witness { value, ..witness });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SuiteKind {
    /// Mean-square magnitudes of RC vs AC.
    MeanSquare,
    /// Pointwise DVAO vs RC magnitudes and the key identity.
    Pointwise,
    /// Closed-form vs finite-difference sensitivities.
    Sensitivity,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SuiteReport {
    pub kind: SuiteKind,
    pub seed: u64,
    pub cases: usize,
    /// Draws rejected for degenerate spread before a usable group was found.
    pub redraws: usize,
    pub criteria: Vec<CriterionResult>,
    pub passed: bool,
}

impl SuiteReport {
    fn finish(kind: SuiteKind, seed: u64, cases: usize, redraws: usize, criteria: Vec<CriterionResult>) -> Self {
        let passed = criteria.iter().all(|c| c.passed);
        Self {
            kind,
            seed,
            cases,
            redraws,
            criteria,
            passed,
        }
    }

    pub fn criterion(&self, name: &str) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.name == name)
    }
}

fn validate(cases: usize, group_size: (usize, usize), objectives: (usize, usize)) -> Result<()> {
    if cases == 0 {
        return Err(Error::InvalidParameter {
            name: "cases",
            reason: "must be positive",
        });
    }
    if group_size.0 < 2 || group_size.0 > group_size.1 {
        return Err(Error::InvalidParameter {
            name: "group_size",
            reason: "need 2 <= min <= max",
        });
    }
    if objectives.0 < 1 || objectives.0 > objectives.1 {
        return Err(Error::InvalidParameter {
            name: "objectives",
            reason: "need 1 <= min <= max",
        });
    }
    Ok(())
}

struct Case {
    group: RewardGroup,
    weights: WeightVector,
    witness: Witness,
    rng: StreamRng,
}

/// Draws case `index`: shape, weights, then rewards until every objective's
/// population standard deviation exceeds `sigma_floor`.
fn draw_case(
    master: u64,
    index: usize,
    group_size: (usize, usize),
    objectives: (usize, usize),
    sigma_floor: f64,
    redraws: &mut usize,
) -> Case {
    let case_seed = rng::derive_seed(master, index as u64);
    let mut r = StreamRng::seed_from_u64(case_seed);
    let g = r.gen_range(group_size.0..=group_size.1);
    let n = r.gen_range(objectives.0..=objectives.1);
    let weights = rng::simplex_weights(&mut r, n);
    loop {
        let group = rng::uniform_group(&mut r, QueryId(index as u64), g, n);
        let stats = GroupStats::compute(&group, &weights).expect("shapes agree");
        if stats.stds.iter().all(|&s| s > sigma_floor) {
            return Case {
                group,
                weights,
                witness: Witness {
                    case: index,
                    case_seed,
                    group_size: g,
                    objectives: n,
                    value: 0.0,
                },
                rng: r,
            };
        }
        *redraws += 1;
    }
}

/// Mean-square suite: unit RC magnitude, AC closed form, and the inequality.
pub fn mean_square_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    validate(config.cases, config.group_size, config.objectives)?;
    let estimator = AdvantageEstimator::new(config.deviation);
    let mut unit = CriterionResult::new("rc_unit_mean_square", tol::ASSERT);
    let mut closed = CriterionResult::new("ac_closed_form_residual", tol::ASSERT);
    let mut ordering = CriterionResult::new("ac_exceeds_rc", tol::ASSERT);
    let mut redraws = 0;
    for i in 0..config.cases {
        let case = draw_case(
            config.seed,
            i,
            config.group_size,
            config.objectives,
            tol::DEGENERATE,
            &mut redraws,
        );
        let report = proposition1_check_with(estimator, &case.group, &case.weights)?
            .applicable()
            .expect("draws are non-degenerate");
        unit.record(report.unit_residual, case.witness);
        closed.record(report.closed_form_residual, case.witness);
        ordering.record(report.rhs - report.lhs, case.witness);
    }
    Ok(SuiteReport::finish(
        SuiteKind::MeanSquare,
        config.seed,
        config.cases,
        redraws,
        alloc::vec![unit, closed, ordering],
    ))
}

/// Pointwise suite: DVAO bounded by RC, the key identity, and equality on
/// groups whose columns are all copies of one column.
pub fn pointwise_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    validate(config.cases, config.group_size, config.objectives)?;
    let estimator = AdvantageEstimator::new(config.deviation);
    let mut bound = CriterionResult::new("dvao_within_rc", tol::ASSERT);
    let mut identity = CriterionResult::new("key_identity_residual", tol::ASSERT);
    let mut equality = CriterionResult::new("duplicated_columns_equality_gap", tol::ASSERT);
    let mut redraws = 0;
    for i in 0..config.cases {
        let mut case = draw_case(
            config.seed,
            i,
            config.group_size,
            config.objectives,
            tol::DEGENERATE,
            &mut redraws,
        );
        let report = proposition2_check_with(estimator, &case.group, &case.weights)?
            .applicable()
            .expect("draws are non-degenerate");
        bound.record(report.max_excess, case.witness);
        identity.record(report.identity_residual, case.witness);

        let source = case.rng.gen_range(0..case.group.num_objectives());
        let column: Vec<f64> = case.group.rewards().column(source).collect();
        let n = case.group.num_objectives();
        let rows: Vec<Vec<f64>> = column.iter().map(|&v| alloc::vec![v; n]).collect();
        let duplicated = RewardGroup::new(case.group.query_id(), Matrix::from_rows(&rows).expect("rectangular"))?;
        let report = proposition2_check_with(estimator, &duplicated, &case.weights)?
            .applicable()
            .expect("source column is non-degenerate");
        equality.record(report.max_gap, case.witness);
    }
    Ok(SuiteReport::finish(
        SuiteKind::Pointwise,
        config.seed,
        config.cases,
        redraws,
        alloc::vec![bound, identity, equality],
    ))
}

/// Sensitivity suite: max relative error of both closed forms against
/// central differences.
pub fn sensitivity_suite(config: &SensitivitySuiteConfig) -> Result<SuiteReport> {
    validate(config.cases, config.group_size, config.objectives)?;
    let mut criteria = [
        CriterionResult::new("ac_max_rel_error", SENSITIVITY_TOLERANCE),
        CriterionResult::new("dvao_max_rel_error", SENSITIVITY_TOLERANCE),
    ];
    let mut redraws = 0;
    for i in 0..config.cases {
        let case = draw_case(
            config.seed,
            i,
            config.group_size,
            config.objectives,
            config.sigma_floor,
            &mut redraws,
        );
        for (criterion, method) in criteria.iter_mut().zip(SensitivityMethod::ALL) {
            let report = sensitivity_report(&case.group, &case.weights, method, config.step)?;
            criterion.record(report.max_rel_error, case.witness);
        }
    }
    Ok(SuiteReport::finish(
        SuiteKind::Sensitivity,
        config.seed,
        config.cases,
        redraws,
        criteria.into_iter().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            cases: 300,
            seed: 99,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn small_suites_pass() {
        assert!(mean_square_suite(&small()).unwrap().passed);
        assert!(pointwise_suite(&small()).unwrap().passed);
        let s = sensitivity_suite(&SensitivitySuiteConfig {
            cases: 40,
            ..Default::default()
        })
        .unwrap();
        assert!(s.passed, "{:?}", s.criteria);
    }

    #[test]
    fn suites_are_reproducible() {
        assert_eq!(
            mean_square_suite(&small()).unwrap(),
            mean_square_suite(&small()).unwrap()
        );
    }

    #[test]
    fn sample_deviation_is_detected() {
        let cfg = SuiteConfig {
            deviation: Deviation::Sample,
            ..small()
        };
        let r = mean_square_suite(&cfg).unwrap();
        assert!(!r.passed);
        let closed = r.criterion("ac_closed_form_residual").unwrap();
        assert_eq!(closed.failures, cfg.cases);
    }

    #[test]
    fn zero_cases_rejected() {
        let cfg = SuiteConfig { cases: 0, ..small() };
        assert!(matches!(
            mean_square_suite(&cfg),
            Err(Error::InvalidParameter { name: "cases", .. })
        ));
    }

    #[test]
    fn nan_is_a_failure() {
        let mut c = CriterionResult::new("x", 1.0);
        let w = Witness {
            case: 0,
            case_seed: 0,
            group_size: 2,
            objectives: 1,
            value: 0.0,
        };
        c.record(0.5, w);
        c.record(f64::NAN, w);
        c.record(0.7, w);
        assert!(!c.passed);
        assert_eq!(c.failures, 1);
        assert!(c.worst.unwrap().value.is_nan());
    }
}
