//! Street-network, station, distance-response and period CSV files.

use std::io::Write;
use std::path::Path;

use boundary_core::network::{CoverageField, Edge, StationSpec, StreetNetwork, TimeVaryingDiffusion};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result, RowError};

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| LabError::csv(path, e))?;
    let mut rows = Vec::new();
    for (i, r) in reader.deserialize().enumerate() {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                let err = RowError { row: i + 1, column: None, message: e.to_string() };
                return Err(LabError::Rows { path: path.into(), errors: vec![err] });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    u: String,
    v: String,
    travel_time_minutes: f64,
}

/// Edge list with columns `u, v, travel_time_minutes`.
pub fn load_network(path: &Path) -> Result<StreetNetwork> {
    let edges: Vec<Edge> = read_rows::<EdgeRow>(path)?.into_iter().map(|r| Edge::new(r.u, r.v, r.travel_time_minutes)).collect();
    Ok(StreetNetwork::new(&[], &edges)?)
}

#[derive(Debug, Deserialize)]
struct StationRow {
    node: String,
    #[serde(default = "yes")]
    operational: u8,
    capacity: f64,
}

fn yes() -> u8 {
    1
}

/// Station list with columns `node, operational (0/1, optional), capacity`.
pub fn load_stations(path: &Path) -> Result<Vec<StationSpec>> {
    Ok(read_rows::<StationRow>(path)?
        .into_iter()
        .map(|r| StationSpec { node: r.node, operational: r.operational != 0, capacity: r.capacity })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DistanceResponse {
    pub distance: f64,
    pub delta_response: f64,
}

pub fn load_distance_response(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(read_rows::<DistanceResponse>(path)?.into_iter().map(|r| (r.distance, r.delta_response)).unzip())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodRow {
    pub period: String,
    pub avg_speed: f64,
    pub d_hat: f64,
    pub kappa_eff: f64,
}

/// Periods with columns `period, avg_speed, d_hat, kappa_eff`; `free_flow_speed` documents the anchor.
pub fn load_periods(path: &Path, free_flow_speed: f64) -> Result<(TimeVaryingDiffusion, Vec<f64>)> {
    let rows: Vec<PeriodRow> = read_rows(path)?;
    let kappa = rows.iter().map(|r| r.kappa_eff).collect();
    let tv = TimeVaryingDiffusion::new(
        rows.iter().map(|r| r.period.clone()).collect(),
        rows.iter().map(|r| r.avg_speed).collect(),
        rows.iter().map(|r| r.d_hat).collect(),
        free_flow_speed,
    )?;
    Ok((tv, kappa))
}

/// Long-format snapshots: `time, node, coverage`.
pub fn write_coverage<W: Write>(out: W, net: &StreetNetwork, snapshots: &[CoverageField]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "node", "coverage"])?;
    for s in snapshots {
        let time = s.time.map_or_else(|| "steady".to_string(), |t| t.to_string());
        for (label, u) in net.labels().iter().zip(&s.values) {
            w.write_record([time.as_str(), label, &u.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
