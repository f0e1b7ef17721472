//! Report tables. Every JSON table carries `schema_version` and `table` keys
//! and validates against `schemas/<table>.schema.json`.

use std::io::Write;
use std::path::Path;

use boundary_core::causal::{DidResult, EventStudyResult};
use boundary_core::data::{CoverageGapReport, Dataset, DatasetSummary, Provenance};
use boundary_core::network::{FormComparison, SqrtLawResult, TimeVaryingDiffusion};
use boundary_core::nonparametric::{CurveEstimate, FitComparison};
use boundary_core::parametric::{BoundaryEstimate, DecayFit, GroupFit, GroupTest};
use boundary_core::spectest::SpecTestResult;
use boundary_core::vulnerable::VulnerableProfile;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const SCHEMA_VERSION: &str = "1.0";

/// Names of the JSON tables with shipped schemas.
pub const TABLE_NAMES: [&str; 12] = [
    "summary_stats",
    "coverage_gaps",
    "decay_params",
    "heterogeneity",
    "nonparametric_comparison",
    "did_results",
    "event_study",
    "spec_tests",
    "vulnerable_pops",
    "time_varying_D-slope",
    "functional_form",
    "network_steady_state",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: String,
    pub table: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(table: &str, body: T) -> Self {
        Self { schema_version: SCHEMA_VERSION.into(), table: table.into(), body }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub n: usize,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl DatasetInfo {
    pub fn of(ds: &Dataset) -> Self {
        Self { n: ds.len(), provenance: ds.provenance(), seed: ds.seed() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub dataset: DatasetInfo,
    pub summary: DatasetSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    pub dataset: DatasetInfo,
    pub rows: Vec<CoverageGapReport>,
}

/// One sample's decay fit and boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub sample: String,
    pub n: usize,
    pub tau0: f64,
    pub se_tau0: f64,
    pub lambda: f64,
    pub se_lambda: f64,
    pub r_squared: f64,
    pub boundary: Option<BoundaryEstimate>,
}

impl DecayRow {
    pub fn new(sample: &str, fit: &DecayFit, boundary: Option<BoundaryEstimate>) -> Self {
        Self {
            sample: sample.into(),
            n: fit.n,
            tau0: fit.tau0,
            se_tau0: fit.se_tau0,
            lambda: fit.lambda,
            se_lambda: fit.se_lambda,
            r_squared: fit.r_squared,
            boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub dataset: DatasetInfo,
    pub epsilon: f64,
    pub rows: Vec<DecayRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityBlock {
    pub grouping: String,
    pub groups: Vec<GroupFit>,
    pub tests: Vec<GroupTest>,
    /// Set when the grouping could not be fitted.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityTable {
    pub dataset: DatasetInfo,
    pub epsilon: f64,
    pub groupings: Vec<HeterogeneityBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub method: String,
    pub bandwidth: f64,
    pub fallback_points: usize,
    pub selected_penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonparametricTable {
    pub dataset: DatasetInfo,
    pub grid_points: usize,
    pub curves: Vec<CurveSummary>,
    pub comparison: FitComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidTable {
    pub dataset: DatasetInfo,
    pub treatment_time: Option<String>,
    pub injected_effect: Option<f64>,
    pub standard: DidResult,
    pub moderated: Option<DidResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyTable {
    pub dataset: DatasetInfo,
    pub treatment_time: Option<String>,
    pub result: EventStudyResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecTestTable {
    pub dataset: DatasetInfo,
    pub seed: u64,
    pub lambda: f64,
    pub result: SpecTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerableTable {
    pub dataset: DatasetInfo,
    pub profile: VulnerableProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEntry {
    pub period: String,
    pub avg_speed: f64,
    pub d_hat: f64,
    pub kappa_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqrtLawTable {
    pub source: String,
    pub free_flow_speed: f64,
    pub periods: Vec<PeriodEntry>,
    pub result: SqrtLawResult,
}

impl SqrtLawTable {
    pub fn new(source: &str, tv: &TimeVaryingDiffusion, kappa: &[f64], result: SqrtLawResult) -> Self {
        let periods = (0..tv.len())
            .map(|i| PeriodEntry { period: tv.periods[i].clone(), avg_speed: tv.avg_speed[i], d_hat: tv.d_hat[i], kappa_eff: kappa[i] })
            .collect();
        Self { source: source.into(), free_flow_speed: tv.free_flow_speed, periods, result }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormTable {
    pub source: String,
    pub comparison: FormComparison,
    /// `ln 2 / κ̂_eff`.
    pub half_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateTable {
    pub source: String,
    pub nodes: usize,
    pub edges: usize,
    pub diffusion: f64,
    pub kappa: f64,
    pub kappa_eff: f64,
    pub residual_inf: f64,
    pub critical_distance: f64,
    pub epsilon: f64,
    /// Largest relative gap to `u₀ e^{−κ_eff d}` within `3/κ_eff` of the first station.
    pub max_relative_error: Option<f64>,
    pub closure_snapshots: usize,
    pub closure_stability_bound: f64,
}

/// Pretty JSON with a trailing newline; key order follows the struct layout.
pub fn write_json<T: Serialize>(path: &Path, table: &str, body: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Envelope::new(table, body))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

/// Long-format curve CSV: `method, grid, value` with empty values where undefined.
pub fn write_curves<W: Write>(out: W, curves: &[CurveEstimate]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "grid", "value"])?;
    for c in curves {
        for (g, v) in c.grid.iter().zip(&c.values) {
            w.write_record([c.config.method.as_str(), &g.to_string(), &v.map_or_else(String::new, |v| v.to_string())])?;
        }
    }
    w.flush()?;
    Ok(())
}
