//! Aggregation with bootstrap confidence intervals, generated-vs-reference
//! regressions, and report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::corpus::{age_years, Role};
use crate::digest::fnv1a64;
use crate::metrics::{Measure, MetricRecord};

pub const REFERENCE_SOURCE: &str = "reference";
pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{source_label} has {got} observation(s); at least 2 are needed")]
    TooFewObservations { source_label: String, got: usize },
    #[error("n_boot must be at least 1")]
    NoResamples,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub measure: Measure,
    pub role: Role,
    pub source: String,
    /// Whole years; `None` for records without an age.
    pub age_years: Option<u32>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Defined values.
    pub n: usize,
    pub n_undefined: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Percentile bootstrap interval (2.5%, 97.5%) of the mean. The bounds are
/// widened if needed so the sample mean lies inside.
pub fn bootstrap_ci(values: &[f64], n_boot: usize, rng: &mut impl Rng) -> (f64, f64) {
    let m = mean(values);
    let n = values.len();
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let low = quantile(&means, 0.025).min(m);
    let high = quantile(&means, 0.975).max(m);
    (low, high)
}

/// Stable per-group stream: the run seed mixed with a hash of the group key.
fn group_rng(seed: u64, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(seed, key.as_bytes()))
}

/// One row per (role, source, age) group with at least one defined value of
/// `measure`. Groups with none are omitted and returned as notes.
pub fn aggregate_with_ci(
    records: &[MetricRecord],
    measure: Measure,
    n_boot: usize,
    seed: u64,
) -> Result<(Vec<AggregateRow>, Vec<String>)> {
    if n_boot == 0 {
        return Err(AnalysisError::NoResamples);
    }
    let mut groups: BTreeMap<(Role, String, Option<u32>), (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let entry = groups
            .entry((r.role, r.source.clone(), r.age_months.map(age_years)))
            .or_default();
        match r.get(measure).value() {
            Some(v) => entry.0.push(v),
            None => entry.1 += 1,
        }
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for ((role, source, age), (values, undefined)) in groups {
        let age_label = age.map_or("unknown".to_string(), |a| a.to_string());
        if values.is_empty() {
            notes.push(format!(
                "{measure}/{}/{source}/age {age_label}: no defined values ({undefined} undefined)",
                role.as_str()
            ));
            continue;
        }
        let key = format!("{measure}|{}|{source}|{age_label}", role.as_str());
        let (ci_low, ci_high) = bootstrap_ci(&values, n_boot, &mut group_rng(seed, &key));
        rows.push(AggregateRow {
            measure,
            role,
            source,
            age_years: age,
            mean: mean(&values),
            ci_low,
            ci_high,
            n: values.len(),
            n_undefined: undefined,
        });
    }
    Ok((rows, notes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub measure: Measure,
    pub role: Role,
    pub configuration: String,
    /// Generated-minus-reference effect.
    pub coefficient: f64,
    pub std_error: Option<f64>,
    pub p_value: Option<f64>,
    /// Why `p_value` is missing.
    pub note: Option<String>,
    pub n_obs: usize,
    pub n_reference: usize,
    pub n_generated: usize,
}

/// OLS of value on an intercept and a generated-source indicator, with a
/// two-sided t-test on the indicator.
pub fn regress_vs_reference(
    generated: &[f64],
    reference: &[f64],
    measure: Measure,
    role: Role,
    configuration: &str,
) -> Result<RegressionResult> {
    for (label, values) in [(configuration, generated), (REFERENCE_SOURCE, reference)] {
        if values.len() < 2 {
            return Err(AnalysisError::TooFewObservations {
                source_label: label.to_string(),
                got: values.len(),
            });
        }
    }
    let n1 = generated.len() as f64;
    let n = n1 + reference.len() as f64;
    let sum_y: f64 = generated.iter().chain(reference).sum();
    let sum_y1: f64 = generated.iter().sum();

    // Normal equations [n n1; n1 n1] b = [sum_y; sum_y1].
    let det = n * n1 - n1 * n1;
    let b1 = (n * sum_y1 - n1 * sum_y) / det;
    let b0 = (sum_y - n1 * b1) / n;

    let rss: f64 = generated
        .iter()
        .map(|y| y - b0 - b1)
        .chain(reference.iter().map(|y| y - b0))
        .map(|e| e * e)
        .sum();
    let df = n - 2.0;
    let s2 = rss / df;
    let mut result = RegressionResult {
        measure,
        role,
        configuration: configuration.to_string(),
        coefficient: b1,
        std_error: None,
        p_value: None,
        note: None,
        n_obs: n as usize,
        n_reference: reference.len(),
        n_generated: generated.len(),
    };
    // Relative threshold: residuals of exactly shifted data are rounding noise.
    let scale = generated.iter().chain(reference).fold(0.0f64, |a, y| a.max(y.abs())).max(1.0);
    if s2.sqrt() <= 1e-12 * scale {
        result.note = Some("degenerate design: zero residual variance".into());
        return Ok(result);
    }
    let se = (s2 * n / det).sqrt();
    let t = b1 / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 2");
    result.std_error = Some(se);
    result.p_value = Some((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0));
    Ok(result)
}

fn defined(records: &[MetricRecord], measure: Measure, role: Role, source: &str) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.role == role && r.source == source)
        .filter_map(|r| r.get(measure).value())
        .collect()
}

/// Every non-reference source against the reference, for each measure and
/// role where both sides have at least two defined values.
pub fn all_regressions(records: &[MetricRecord]) -> (Vec<RegressionResult>, Vec<String>) {
    let sources: Vec<String> = {
        let mut s: Vec<String> = records
            .iter()
            .map(|r| r.source.clone())
            .filter(|s| s != REFERENCE_SOURCE)
            .collect();
        s.sort();
        s.dedup();
        s
    };
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for measure in Measure::ALL {
        for role in Role::ALL {
            let reference = defined(records, measure, role, REFERENCE_SOURCE);
            for source in &sources {
                let has_role = records.iter().any(|r| &r.source == source && r.role == role);
                if !has_role {
                    continue;
                }
                let generated = defined(records, measure, role, source);
                match regress_vs_reference(&generated, &reference, measure, role, source) {
                    Ok(r) => rows.push(r),
                    Err(e) => notes.push(format!("{measure}/{}/{source}: {e}", role.as_str())),
                }
            }
        }
    }
    (rows, notes)
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRef {
    pub configuration: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub source: String,
    pub role: Role,
    pub measure: Measure,
    pub records: usize,
    pub defined: usize,
    pub undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub toolkit_version: String,
    pub n_boot: usize,
    pub seed: u64,
    pub manifests: Vec<ManifestRef>,
    pub counts: Vec<CountRow>,
    pub aggregate_rows: usize,
    pub regression_rows: usize,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub aggregates: Vec<AggregateRow>,
    pub regressions: Vec<RegressionResult>,
    pub summary: ReportSummary,
}

fn counts(records: &[MetricRecord]) -> Vec<CountRow> {
    let mut map: BTreeMap<(String, Role, Measure), (usize, usize)> = BTreeMap::new();
    for r in records {
        for m in Measure::ALL {
            let e = map.entry((r.source.clone(), r.role, m)).or_default();
            match r.get(m).value() {
                Some(_) => e.0 += 1,
                None => e.1 += 1,
            }
        }
    }
    map.into_iter()
        .map(|((source, role, measure), (d, u))| CountRow {
            source,
            role,
            measure,
            records: d + u,
            defined: d,
            undefined: u,
        })
        .collect()
}

/// Aggregates and regressions over all records. Measures run in parallel;
/// results are in a fixed order.
pub fn analyze(
    records: &[MetricRecord],
    manifests: Vec<ManifestRef>,
    n_boot: usize,
    seed: u64,
    warnings: Vec<String>,
) -> Result<Report> {
    let per_measure: Vec<(Vec<AggregateRow>, Vec<String>)> = Measure::ALL
        .par_iter()
        .map(|&m| aggregate_with_ci(records, m, n_boot, seed))
        .collect::<Result<_>>()?;
    let mut aggregates = Vec::new();
    let mut notes = Vec::new();
    for (rows, n) in per_measure {
        aggregates.extend(rows);
        notes.extend(n);
    }
    let (regressions, reg_notes) = all_regressions(records);
    notes.extend(reg_notes);
    let summary = ReportSummary {
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
        n_boot,
        seed,
        manifests,
        counts: counts(records),
        aggregate_rows: aggregates.len(),
        regression_rows: regressions.len(),
        notes,
        warnings,
    };
    Ok(Report {
        aggregates,
        regressions,
        summary,
    })
}

fn io_err(path: &Path, source: std::io::Error) -> AnalysisError {
    AnalysisError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct PlotPoint {
    x: Option<u32>,
    y: f64,
    error_low: f64,
    error_high: f64,
    n: usize,
}

#[derive(Serialize)]
struct PlotSeries {
    source: String,
    points: Vec<PlotPoint>,
}

#[derive(Serialize)]
struct PlotData<'a> {
    measure: &'a str,
    role: &'a str,
    x_label: &'a str,
    series: Vec<PlotSeries>,
}

pub const AGGREGATES_DIR: &str = "aggregates";
pub const PLOT_DIR: &str = "plot_data";
pub const REGRESSIONS_FILE: &str = "regressions.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `aggregates/<measure>_<role>.csv` (12 tables, header-only when
/// empty), `regressions.csv`, `plot_data/<measure>_<role>.json` and
/// `summary.json`.
pub fn build_report(report: &Report, out_dir: &Path) -> Result<()> {
    let agg_dir = out_dir.join(AGGREGATES_DIR);
    let plot_dir = out_dir.join(PLOT_DIR);
    for d in [&agg_dir, &plot_dir] {
        fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    for measure in Measure::ALL {
        for role in Role::ALL {
            let rows: Vec<&AggregateRow> = report
                .aggregates
                .iter()
                .filter(|r| r.measure == measure && r.role == role)
                .collect();
            let stem = format!("{}_{}", measure.name(), role.as_str());
            let path = agg_dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["source", "age_years", "mean", "ci_low", "ci_high", "n", "n_undefined"])?;
            for r in &rows {
                w.write_record([
                    r.source.clone(),
                    r.age_years.map(|a| a.to_string()).unwrap_or_default(),
                    r.mean.to_string(),
                    r.ci_low.to_string(),
                    r.ci_high.to_string(),
                    r.n.to_string(),
                    r.n_undefined.to_string(),
                ])?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;

            let mut series: BTreeMap<&str, Vec<PlotPoint>> = BTreeMap::new();
            for r in &rows {
                series.entry(&r.source).or_default().push(PlotPoint {
                    x: r.age_years,
                    y: r.mean,
                    error_low: r.ci_low,
                    error_high: r.ci_high,
                    n: r.n,
                });
            }
            let plot = PlotData {
                measure: measure.name(),
                role: role.as_str(),
                x_label: "age_years",
                series: series
                    .into_iter()
                    .map(|(s, points)| PlotSeries { source: s.to_string(), points })
                    .collect(),
            };
            let path = plot_dir.join(format!("{stem}.json"));
            fs::write(&path, serde_json::to_string_pretty(&plot)? + "\n").map_err(|e| io_err(&path, e))?;
        }
    }

    let path = out_dir.join(REGRESSIONS_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "measure",
        "role",
        "configuration",
        "coefficient",
        "std_error",
        "p_value",
        "note",
        "n_obs",
        "n_reference",
        "n_generated",
    ])?;
    for r in &report.regressions {
        w.write_record([
            r.measure.name().to_string(),
            r.role.as_str().to_string(),
            r.configuration.clone(),
            r.coefficient.to_string(),
            opt(r.std_error),
            opt(r.p_value),
            r.note.clone().unwrap_or_default(),
            r.n_obs.to_string(),
            r.n_reference.to_string(),
            r.n_generated.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = out_dir.join(SUMMARY_FILE);
    fs::write(&path, serde_json::to_string_pretty(&report.summary)? + "\n").map_err(|e| io_err(&path, e))?;
    Ok(())
}
