//! Versioned result records: JSON persistence plus a flat CSV of the
//! recorded curves.

use crate::error::{io_error, parse_error, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// One recorded metric sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub trial: usize,
    pub method: String,
    pub step: usize,
    pub metric: String,
    pub value: f64,
}

/// Per-method accuracy summary over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Test accuracy of the final iterate, mean over trials.
    pub final_accuracy_mean: f64,
    pub final_accuracy_std: f64,
    /// Best test accuracy over the evaluation snapshots, mean over
    /// trials. Reported separately from the final value; neither is
    /// canonical.
    pub best_accuracy_mean: f64,
    pub best_accuracy_std: f64,
    pub per_trial_final: Vec<f64>,
    pub per_trial_best: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceTrial {
    pub trial: usize,
    pub min_error: f64,
    pub argmin_step: usize,
    /// First snapshot step at or below epsilon, if any.
    pub first_success_step: Option<usize>,
    pub success: bool,
    pub final_norm: f64,
    pub final_correlation: f64,
    /// Least-squares slope of w.w* over the pre-convergence snapshots.
    pub correlation_slope: f64,
    pub norm_bound_ok: bool,
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceReport {
    pub steps: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub trials: Vec<HalfspaceTrial>,
    pub success_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingGamma {
    pub gamma: f64,
    pub budget: usize,
    /// First probe step with held-out error <= epsilon, per trial;
    /// `None` marks a censored trial.
    pub hitting_times: Vec<Option<usize>>,
    /// Median hitting time; `None` when at least half the trials were
    /// censored (the gamma is then excluded from the fit).
    pub median_hitting_time: Option<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub gammas: Vec<ScalingGamma>,
    /// Least-squares slope of log T* against log gamma over the
    /// uncensored gammas.
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Structured outcome of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub config: BTreeMap<String, String>,
    pub methods: Vec<MethodSummary>,
    pub curves: Vec<CurvePoint>,
    pub halfspace: Option<HalfspaceReport>,
    pub scaling: Option<ScalingReport>,
    pub skip_counts: BTreeMap<String, u64>,
    /// Top-level scalar metrics (success rates, fitted slopes, ...).
    pub metrics: BTreeMap<String, f64>,
    pub timing_seconds: f64,
}

impl RunResult {
    pub fn new(config: BTreeMap<String, String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            methods: Vec::new(),
            curves: Vec::new(),
            halfspace: None,
            scaling: None,
            skip_counts: BTreeMap::new(),
            metrics: BTreeMap::new(),
            timing_seconds: 0.0,
        }
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Path of the companion curves CSV for a results file.
pub fn curves_csv_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".to_string());
    name.push_str(".curves.csv");
    path.with_file_name(name)
}

/// Writes the result as JSON and its curves as a flat CSV
/// (`trial,method,step,metric,value`) next to it. Numbers round-trip
/// exactly through the JSON.
pub fn emit_results(result: &RunResult, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(result)
        .map_err(|e| parse_error("run result", e.to_string()))?;
    std::fs::write(path, json)
        .map_err(|e| io_error(format!("writing results to {}", path.display()), e))?;

    let csv_path = curves_csv_path(path);
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| parse_error(format!("curves csv {}", csv_path.display()), e.to_string()))?;
    for point in &result.curves {
        writer
            .serialize(point)
            .map_err(|e| parse_error(format!("curves csv {}", csv_path.display()), e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| io_error(format!("flushing curves to {}", csv_path.display()), e))?;
    Ok(())
}

/// Loads a results file, verifying the schema version first.
pub fn load_results(path: &Path) -> Result<RunResult> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_error(format!("reading results from {}", path.display()), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| parse_error(format!("results file {}", path.display()), e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| {
            parse_error(
                format!("results file {}", path.display()),
                "missing schema_version",
            )
        })?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            found: found as u32,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_value(value)
        .map_err(|e| parse_error(format!("results file {}", path.display()), e.to_string()))
}

/// Equality on everything except wall-clock timing.
pub fn results_equal_ignoring_timing(a: &RunResult, b: &RunResult) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    a.timing_seconds = 0.0;
    b.timing_seconds = 0.0;
    a == b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_result() -> RunResult {
        let mut result = RunResult::new(BTreeMap::from([(
            "experiment".to_string(),
            "distill".to_string(),
        )]));
        result.methods.push(MethodSummary {
            method: "vanilla-soft".to_string(),
            final_accuracy_mean: 0.81,
            final_accuracy_std: 0.01,
            best_accuracy_mean: 0.83,
            best_accuracy_std: 0.008,
            per_trial_final: vec![0.8, 0.82],
            per_trial_best: vec![0.83, 0.83],
        });
        result.curves.push(CurvePoint {
            trial: 0,
            method: "vanilla-soft".to_string(),
            step: 5,
            metric: "test_accuracy".to_string(),
            value: 0.1 + 0.2, // deliberately non-representable exactly in decimal
        });
        result.timing_seconds = 1.25;
        result
    }

    #[test]
    fn write_then_read_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        let result = sample_result();
        emit_results(&result, &path).unwrap();
        let loaded = load_results(&path).unwrap();
        assert_eq!(result, loaded);
    }

    #[test]
    fn curves_csv_has_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        let mut result = sample_result();
        for step in 0..7 {
            result.curves.push(CurvePoint {
                trial: 1,
                method: "slam-estimated".to_string(),
                step,
                metric: "train_loss".to_string(),
                value: step as f64,
            });
        }
        emit_results(&result, &path).unwrap();
        let text = std::fs::read_to_string(curves_csv_path(&path)).unwrap();
        let rows = text.lines().count();
        assert_eq!(rows, result.curves.len() + 1); // header + points
    }

    #[test]
    fn version_mismatch_is_an_explicit_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        let mut result = sample_result();
        result.schema_version = SCHEMA_VERSION + 5;
        let json = serde_json::to_string(&result).unwrap();
        std::fs::write(&path, json).unwrap();
        match load_results(&path) {
            Err(Error::SchemaVersion { found, expected }) => {
                assert_eq!(found, SCHEMA_VERSION + 5);
                assert_eq!(expected, SCHEMA_VERSION);
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn timing_is_excluded_from_comparisons() {
        let a = sample_result();
        let mut b = a.clone();
        b.timing_seconds = 99.0;
        assert!(results_equal_ignoring_timing(&a, &b));
        b.methods[0].final_accuracy_mean = 0.5;
        assert!(!results_equal_ignoring_timing(&a, &b));
    }
}
