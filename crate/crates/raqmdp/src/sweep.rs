//! Parameter sweeps: run a grid of episodes, aggregate per-cell metrics into
//! a summary table, and render one tradeoff scatter per sensor range.

use crate::config::{load_scenario, ConfigError};
use crate::idm::safe_distance;
use crate::sim::planner::PlannerKind;
use crate::sim::sensor::SensorModel;
use crate::sim::{run_episode, Scenario};
use crate::svg::{scatter_svg, ScatterPoint};
use rayon::prelude::*;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: Box<toml::de::Error> },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("failed to write output: {0}")]
    Output(std::io::Error),
}

/// Which scenario knob the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Epsilon,
    SensorRange,
    Planner,
}

/// One sweep value: numeric for the continuous parameters, a planner name
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepValue {
    Number(f64),
    Name(String),
}

impl SweepValue {
    pub fn label(&self) -> String {
        match self {
            SweepValue::Number(v) => v.to_string(),
            SweepValue::Name(s) => s.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    sweep: SweepSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    parameter: SweepParameter,
    values: Vec<toml::Value>,
    seeds: Vec<u64>,
    /// Scenario config path, relative to the sweep file.
    scenario: String,
    /// Optional extra axis: rerun the grid at each of these sensor ranges.
    #[serde(default)]
    sensor_ranges: Option<Vec<f64>>,
}

/// Validated sweep specification.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<SweepValue>,
    pub seeds: Vec<u64>,
    pub scenario: Scenario,
    pub sensor_ranges: Option<Vec<f64>>,
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec, SweepError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| SweepError::Io { path: display.clone(), source })?;
    let file: SweepFile = toml::from_str(&text)
        .map_err(|source| SweepError::Parse { path: display.clone(), source: Box::new(source) })?;
    let s = file.sweep;

    let invalid = |message: String| SweepError::Invalid { path: display.clone(), message };
    if s.values.is_empty() {
        return Err(invalid("sweep.values must not be empty".into()));
    }
    if s.seeds.is_empty() {
        return Err(invalid("sweep.seeds must not be empty".into()));
    }
    let values: Vec<SweepValue> = s
        .values
        .iter()
        .map(|v| match (s.parameter, v) {
            (SweepParameter::Planner, toml::Value::String(name)) => {
                PlannerKind::parse(name)
                    .map(|_| SweepValue::Name(name.clone()))
                    .ok_or_else(|| invalid(format!("sweep.values: unknown planner '{name}'")))
            }
            (SweepParameter::Planner, other) => {
                Err(invalid(format!("sweep.values: planner sweep needs strings, got {other}")))
            }
            (_, toml::Value::Float(x)) => Ok(SweepValue::Number(*x)),
            (_, toml::Value::Integer(x)) => Ok(SweepValue::Number(*x as f64)),
            (_, other) => Err(invalid(format!("sweep.values: expected a number, got {other}"))),
        })
        .collect::<Result<_, _>>()?;

    let scenario_path = path.parent().unwrap_or(Path::new(".")).join(&s.scenario);
    let loaded = load_scenario(&scenario_path)?;

    Ok(SweepSpec {
        parameter: s.parameter,
        values,
        seeds: s.seeds,
        scenario: loaded.scenario,
        sensor_ranges: s.sensor_ranges,
    })
}

fn apply_value(base: &Scenario, param: SweepParameter, value: &SweepValue) -> Result<Scenario, String> {
    let mut s = base.clone();
    match (param, value) {
        (SweepParameter::Alpha, SweepValue::Number(a)) => s.risk.alpha = *a,
        (SweepParameter::Epsilon, SweepValue::Number(e)) => s.search.epsilon_root = *e,
        (SweepParameter::SensorRange, SweepValue::Number(r)) => apply_range(&mut s, *r)?,
        (SweepParameter::Planner, SweepValue::Name(name)) => {
            s.planner = PlannerKind::parse(name).ok_or_else(|| format!("unknown planner {name}"))?;
        }
        _ => return Err("sweep value type does not match the parameter".into()),
    }
    Ok(s)
}

fn apply_range(s: &mut Scenario, r: f64) -> Result<(), String> {
    match &mut s.sensor {
        SensorModel::LimitedRange { range, .. } => {
            *range = r;
            Ok(())
        }
        _ => Err("sensor_range applies only to the limited_range sensor".into()),
    }
}

/// Result of one (value, sensor-range, seed) episode.
#[derive(Debug, Clone)]
pub struct CellEpisode {
    pub value: SweepValue,
    pub sensor_range: Option<f64>,
    pub seed: u64,
    pub outcome: Result<CellMetrics, String>,
}

#[derive(Debug, Clone, Copy)]
pub struct CellMetrics {
    pub avg_velocity_pre_event: f64,
    pub max_abs_jerk: f64,
    pub crashed: bool,
}

/// Aggregated row of the summary table: one (value, sensor-range) cell.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub value: SweepValue,
    pub sensor_range: Option<f64>,
    pub episodes: usize,
    pub failures: usize,
    pub crash_count: usize,
    pub v_avg: f64,
    pub max_abs_jerk_avg: f64,
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<SummaryRow>,
    pub episodes: Vec<CellEpisode>,
    /// (sensor-range label, svg text) pairs, one per range.
    pub svgs: Vec<(String, String)>,
    pub summary_csv: String,
}

/// Run the full cross product (values x sensor ranges x seeds).
///
/// Cells execute in parallel; aggregation sorts by cell key so the output is
/// independent of execution order. Individual episode failures are recorded
/// per cell and do not abort the sweep.
pub fn run_sweep(spec: &SweepSpec, idm_for_sstar: &crate::idm::IdmParams) -> SweepReport {
    let ranges: Vec<Option<f64>> = match &spec.sensor_ranges {
        Some(rs) => rs.iter().map(|r| Some(*r)).collect(),
        None => vec![None],
    };

    let mut jobs: Vec<(usize, usize, u64)> = Vec::new();
    for (vi, _) in spec.values.iter().enumerate() {
        for (ri, _) in ranges.iter().enumerate() {
            for &seed in &spec.seeds {
                jobs.push((vi, ri, seed));
            }
        }
    }

    let episodes: Vec<CellEpisode> = jobs
        .par_iter()
        .map(|&(vi, ri, seed)| {
            let value = spec.values[vi].clone();
            let sensor_range = ranges[ri];
            let outcome = (|| {
                let mut scenario = apply_value(&spec.scenario, spec.parameter, &value)?;
                if let Some(r) = sensor_range {
                    apply_range(&mut scenario, r)?;
                }
                let telemetry = run_episode(&scenario, seed).map_err(|e| e.to_string())?;
                Ok(CellMetrics {
                    avg_velocity_pre_event: telemetry.summary.avg_velocity_pre_event,
                    max_abs_jerk: telemetry.summary.max_abs_jerk,
                    crashed: telemetry.summary.crashed,
                })
            })();
            CellEpisode { value, sensor_range, seed, outcome }
        })
        .collect();

    // Aggregate per (value, range), in spec order.
    let mut rows = Vec::new();
    for value in &spec.values {
        for range in &ranges {
            let cell: Vec<&CellEpisode> = episodes
                .iter()
                .filter(|e| &e.value == value && e.sensor_range == *range)
                .collect();
            let ok: Vec<&CellMetrics> =
                cell.iter().filter_map(|e| e.outcome.as_ref().ok()).collect();
            let n = ok.len().max(1) as f64;
            rows.push(SummaryRow {
                value: value.clone(),
                sensor_range: *range,
                episodes: cell.len(),
                failures: cell.iter().filter(|e| e.outcome.is_err()).count(),
                crash_count: ok.iter().filter(|m| m.crashed).count(),
                v_avg: ok.iter().map(|m| m.avg_velocity_pre_event).sum::<f64>() / n,
                max_abs_jerk_avg: ok.iter().map(|m| m.max_abs_jerk).sum::<f64>() / n,
            });
        }
    }

    // Summary table; the safe-distance column is always recomputed from the
    // velocity column.
    let mut csv = String::from(
        "parameter,value,sensor_range,episodes,failures,crashes,v_avg,s_star_of_v_avg,max_abs_jerk_avg\n",
    );
    let param_name = match spec.parameter {
        SweepParameter::Alpha => "alpha",
        SweepParameter::Epsilon => "epsilon",
        SweepParameter::SensorRange => "sensor_range",
        SweepParameter::Planner => "planner",
    };
    for row in &rows {
        let s_star = if row.v_avg.is_finite() && row.v_avg >= 0.0 {
            safe_distance(row.v_avg, 0.0, idm_for_sstar).map(|v| v.to_string()).unwrap_or_default()
        } else {
            String::new()
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            param_name,
            row.value.label(),
            row.sensor_range.map(|r| r.to_string()).unwrap_or_default(),
            row.episodes,
            row.failures,
            row.crash_count,
            row.v_avg,
            s_star,
            row.max_abs_jerk_avg,
        );
    }

    // One tradeoff scatter per sensor range.
    let mut svgs = Vec::new();
    for range in &ranges {
        let points: Vec<ScatterPoint> = rows
            .iter()
            .filter(|r| r.sensor_range == *range)
            .map(|r| ScatterPoint {
                x: r.max_abs_jerk_avg,
                y: r.v_avg,
                label: r.value.label(),
            })
            .collect();
        let label = range.map(|r| r.to_string()).unwrap_or_else(|| "default".into());
        let title = match range {
            Some(r) => format!("Velocity-jerk tradeoff, sensor range {r} m"),
            None => "Velocity-jerk tradeoff".to_string(),
        };
        svgs.push((
            label,
            scatter_svg(&title, "max |jerk| (m/s^3)", "avg velocity (m/s)", &points),
        ));
    }

    SweepReport { rows, episodes, svgs, summary_csv: csv }
}

/// Write the report into `out_dir`: `sweep_summary.csv` plus one
/// `tradeoff_range_<r>.svg` per range. Files are written atomically.
pub fn write_report(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
    std::fs::create_dir_all(out_dir).map_err(SweepError::Output)?;
    let mut written = Vec::new();
    let mut files: Vec<(String, &str)> = vec![("sweep_summary.csv".into(), &report.summary_csv)];
    for (label, svg) in &report.svgs {
        files.push((format!("tradeoff_range_{label}.svg"), svg));
    }
    for (name, content) in files {
        let tmp = out_dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, content).map_err(SweepError::Output)?;
        let final_path = out_dir.join(&name);
        std::fs::rename(&tmp, &final_path).map_err(SweepError::Output)?;
        written.push(final_path);
    }
    Ok(written)
}
