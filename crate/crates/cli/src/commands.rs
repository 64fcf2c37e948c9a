use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dvao_core::analysis::{
    mean_square_suite, pointwise_suite, sensitivity_report, sensitivity_suite, SensitivityMethod, SensitivityReport,
    SuiteKind, SuiteReport, SENSITIVITY_TOLERANCE,
};
use dvao_core::sim::{expected_batch_rewards, pareto_sweep, train_with_clock};
use dvao_core::{Deviation, Method};
use serde::Serialize;
use serde_json::Value;

use crate::artifacts::{sha256_hex, ArtifactWriter, Manifest, CONFIG_FILE, MANIFEST_FILE, TOOLKIT_VERSION};
use crate::cli::Fault;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::{
    self, GroupFixture, PAIRED_CSV, PAIRED_CSV_SCHEMA_VERSION, SWEEP_CSV, SWEEP_CSV_SCHEMA_VERSION, TRAIN_CSV,
    TRAIN_CSV_SCHEMA_VERSION,
};

pub const VERIFY_JSON: &str = "verify.json";
pub const TRAIN_SUMMARY_JSON: &str = "train_summary.json";
pub const SENSITIVITY_JSON: &str = "sensitivity.json";
pub const REPORT_JSON: &str = "report.json";
pub const JSON_SCHEMA_VERSION: u32 = 1;

fn seeds(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub passed: bool,
    pub fault: Option<&'static str>,
    pub suites: Vec<SuiteReport>,
}

pub fn suite_name(kind: SuiteKind) -> &'static str {
    match kind {
        SuiteKind::MeanSquare => "mean_square",
        SuiteKind::Pointwise => "pointwise",
        SuiteKind::Sensitivity => "sensitivity",
    }
}

pub fn verify(config: &RunConfig, fault: Option<Fault>, out: &Path, force: bool) -> Result<VerifyReport, CliError> {
    let mut writer = ArtifactWriter::create(out, &[VERIFY_JSON], force)?;
    let deviation = match fault {
        Some(Fault::SampleStd) => Deviation::Sample,
        None => Deviation::Population,
    };
    let suite = config.suite_config(deviation);
    let suites = vec![
        mean_square_suite(&suite)?,
        pointwise_suite(&suite)?,
        sensitivity_suite(&config.sensitivity_suite_config())?,
    ];
    let report = VerifyReport {
        schema_version: JSON_SCHEMA_VERSION,
        passed: suites.iter().all(|s| s.passed),
        fault: fault.map(Fault::name),
        suites,
    };
    for s in &report.suites {
        for c in &s.criteria {
            let worst = c.worst.map_or(f64::NAN, |w| w.value);
            println!(
                "{:<12} {:<34} {} worst {:.3e} (tolerance {:.0e}, failures {})",
                suite_name(s.kind),
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                worst,
                c.tolerance,
                c.failures
            );
        }
    }
    writer.write_json(VERIFY_JSON, "verify_report", JSON_SCHEMA_VERSION, &report)?;
    writer.finish(
        "verify",
        config,
        seeds(&[
            ("verify.seed", config.verify_seed),
            ("sensitivity_suite_seed", config.sensitivity_seed()),
        ]),
        fault.map(Fault::name),
        false,
    )?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub schema_version: u32,
    pub combiner: Method,
    pub steps_requested: usize,
    pub steps_completed: usize,
    /// Diagnostic when training stopped on a non-finite parameter.
    pub aborted: Option<String>,
    /// Exact expected reward per objective of the final policy.
    pub final_expected_rewards: Option<Vec<f64>>,
    /// Largest `mean |A_DVAO| - mean |A_sum|` over steps.
    pub max_paired_excess: Option<f64>,
}

pub fn train(config: &RunConfig, wall_clock: bool, out: &Path, force: bool) -> Result<TrainSummary, CliError> {
    let mut writer = ArtifactWriter::create(out, &[TRAIN_CSV, PAIRED_CSV, TRAIN_SUMMARY_JSON], force)?;
    let env = config.environment();
    let start = Instant::now();
    let mut clock = || {
        if wall_clock {
            start.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    let outcome = train_with_clock(&config.train, &env, &mut clock)?;
    let objectives = config.train.weights.len();
    let final_expected_rewards = match outcome.abort {
        None => Some(expected_batch_rewards(&outcome.policy, &config.train.queries, &env)?),
        Some(_) => None,
    };
    let summary = TrainSummary {
        schema_version: JSON_SCHEMA_VERSION,
        combiner: config.train.combiner,
        steps_requested: config.train.steps,
        steps_completed: outcome.records.len(),
        aborted: outcome.abort.as_ref().map(ToString::to_string),
        final_expected_rewards,
        max_paired_excess: outcome
            .records
            .iter()
            .map(|r| r.paired_abs_dvao - r.paired_abs_rc)
            .reduce(f64::max),
    };
    writer.write(
        TRAIN_CSV,
        "train_csv",
        TRAIN_CSV_SCHEMA_VERSION,
        &formats::train_csv(&outcome.records, objectives),
    )?;
    writer.write(
        PAIRED_CSV,
        "paired_csv",
        PAIRED_CSV_SCHEMA_VERSION,
        &formats::paired_csv(&outcome.records),
    )?;
    writer.write_json(TRAIN_SUMMARY_JSON, "train_summary", JSON_SCHEMA_VERSION, &summary)?;
    writer.finish(
        "train",
        config,
        seeds(&[("seed", config.train.seed), ("env.noise_seed", config.env.noise_seed)]),
        None,
        wall_clock,
    )?;
    if let Some(rewards) = &summary.final_expected_rewards {
        println!(
            "{} steps, combiner {}, final expected rewards {:?}",
            summary.steps_completed, summary.combiner, rewards
        );
    }
    match outcome.abort {
        Some(err) => Err(CliError::Failed(err.to_string())),
        None => Ok(summary),
    }
}

pub fn sweep(config: &RunConfig, out: &Path, force: bool) -> Result<usize, CliError> {
    let mut writer = ArtifactWriter::create(out, &[SWEEP_CSV], force)?;
    let env = config.environment();
    let rows = pareto_sweep(&config.train, &env, &config.sweep_grid, &config.sweep_combiners)?;
    writer.write(
        SWEEP_CSV,
        "sweep_csv",
        SWEEP_CSV_SCHEMA_VERSION,
        &formats::sweep_csv(&rows),
    )?;
    writer.finish(
        "sweep",
        config,
        seeds(&[("seed", config.train.seed), ("env.noise_seed", config.env.noise_seed)]),
        None,
        false,
    )?;
    for r in &rows {
        println!(
            "{:<5} w1={:<4} exp_reward_1={:.6} exp_reward_2={:.6}",
            r.combiner, r.w1, r.exp_reward_1, r.exp_reward_2
        );
    }
    Ok(rows.len())
}

#[derive(Debug, Serialize)]
pub struct SensitivityOutput {
    pub schema_version: u32,
    pub fixture: PathBuf,
    pub query_id: u64,
    pub group_size: usize,
    pub objectives: usize,
    pub weights: Vec<f64>,
    pub step: f64,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub reports: Vec<SensitivityReport>,
}

pub fn sensitivity(config: &RunConfig, fixture: &Path, out: &Path, force: bool) -> Result<SensitivityOutput, CliError> {
    let mut writer = ArtifactWriter::create(out, &[SENSITIVITY_JSON], force)?;
    let loaded = GroupFixture::load(fixture)?;
    let group = loaded.group()?;
    let weights = loaded.weights(group.num_objectives())?;
    let reports = SensitivityMethod::ALL
        .iter()
        .map(|&m| sensitivity_report(&group, &weights, m, config.sensitivity_step))
        .collect::<Result<Vec<_>, _>>()?;
    let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let output = SensitivityOutput {
        schema_version: JSON_SCHEMA_VERSION,
        fixture: fixture.to_path_buf(),
        query_id: loaded.query_id,
        group_size: group.group_size(),
        objectives: group.num_objectives(),
        weights: weights.as_slice().to_vec(),
        step: config.sensitivity_step,
        tolerance: SENSITIVITY_TOLERANCE,
        max_rel_error,
        passed: reports.iter().all(|r| r.max_rel_error < SENSITIVITY_TOLERANCE),
        reports,
    };
    for r in &output.reports {
        println!("{:?}: max relative error {:.3e}", r.method, r.max_rel_error);
    }
    writer.write_json(SENSITIVITY_JSON, "sensitivity_report", JSON_SCHEMA_VERSION, &output)?;
    writer.finish("sensitivity", config, BTreeMap::new(), None, false)?;
    if !output.passed {
        return Err(CliError::Failed(format!(
            "max relative error {max_rel_error:.3e} exceeds {SENSITIVITY_TOLERANCE:.0e}"
        )));
    }
    Ok(output)
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub run: PathBuf,
    pub command: String,
    pub toolkit_version: String,
    pub produced_by: String,
    pub intact: bool,
    pub problems: Vec<String>,
    pub summary: Value,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn csv_summary(bytes: &[u8]) -> Value {
    let mut reader = csv::Reader::from_reader(bytes);
    let header: Vec<String> = match reader.headers() {
        Ok(h) => h.iter().map(str::to_string).collect(),
        Err(_) => return Value::Null,
    };
    let rows: Vec<csv::StringRecord> = reader.records().filter_map(Result::ok).collect();
    let last = rows.last().map(|r| {
        header
            .iter()
            .zip(r.iter())
            .map(|(h, v)| (h.clone(), v.parse::<f64>().map_or_else(|_| Value::from(v), Value::from)))
            .collect::<serde_json::Map<_, _>>()
    });
    serde_json::json!({ "header": header, "rows": rows.len(), "last_row": last })
}

pub fn report(run: &Path, out: &Path, force: bool) -> Result<RunReport, CliError> {
    let manifest_path = run.join(MANIFEST_FILE);
    let manifest: Manifest = serde_json::from_slice(&read(&manifest_path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", manifest_path.display())))?;
    let mut problems = Vec::new();
    let config_bytes = read(&run.join(CONFIG_FILE))?;
    if sha256_hex(&config_bytes) != manifest.config_sha256 {
        problems.push(format!("{CONFIG_FILE}: hash does not match the manifest"));
    }
    let parsed = std::str::from_utf8(&config_bytes)
        .map_err(|e| e.to_string())
        .and_then(|t| RunConfig::parse(t).map_err(|e| e.to_string()));
    let run_config = match parsed {
        Ok(c) => {
            if c.to_text().as_bytes() != config_bytes {
                problems.push(format!("{CONFIG_FILE}: not in canonical form"));
            }
            c
        }
        Err(e) => {
            problems.push(format!("{CONFIG_FILE}: {e}"));
            RunConfig::default()
        }
    };
    let mut summary = serde_json::Map::new();
    for entry in &manifest.artifacts {
        let path = run.join(&entry.file);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                problems.push(format!("{}: {e}", entry.file));
                continue;
            }
        };
        if sha256_hex(&bytes) != entry.sha256 {
            problems.push(format!("{}: hash does not match the manifest", entry.file));
        }
        let value = if entry.file.ends_with(".csv") {
            csv_summary(&bytes)
        } else {
            match serde_json::from_slice::<Value>(&bytes) {
                Ok(v) => serde_json::json!({
                    "passed": v.get("passed").cloned().unwrap_or(Value::Null),
                    "aborted": v.get("aborted").cloned().unwrap_or(Value::Null),
                    "final_expected_rewards": v.get("final_expected_rewards").cloned().unwrap_or(Value::Null),
                    "max_rel_error": v.get("max_rel_error").cloned().unwrap_or(Value::Null),
                }),
                Err(e) => {
                    problems.push(format!("{}: {e}", entry.file));
                    Value::Null
                }
            }
        };
        summary.insert(entry.file.clone(), value);
    }
    let mut writer = ArtifactWriter::create(out, &[REPORT_JSON], force)?;
    let report = RunReport {
        schema_version: JSON_SCHEMA_VERSION,
        run: run.to_path_buf(),
        command: manifest.command.clone(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
        produced_by: manifest.toolkit_version.clone(),
        intact: problems.is_empty(),
        problems,
        summary: Value::Object(summary),
    };
    writer.write_json(REPORT_JSON, "run_report", JSON_SCHEMA_VERSION, &report)?;
    writer.finish("report", &run_config, BTreeMap::new(), None, false)?;
    println!(
        "{} run in {}: {}",
        report.command,
        run.display(),
        if report.intact { "intact" } else { "MODIFIED" }
    );
    for p in &report.problems {
        println!("  {p}");
    }
    if !report.intact {
        return Err(CliError::Failed(format!(
            "{} does not match its manifest",
            run.display()
        )));
    }
    Ok(report)
}
