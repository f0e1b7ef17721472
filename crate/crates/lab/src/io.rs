//! Incident CSV files.
//!
//! Header row, comma-delimited, RFC 4180 quoting. Timestamps are ISO-8601 in
//! UTC; booleans are written as `0`/`1` and read from `0`/`1`/`true`/`false`.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use boundary_core::data::{Dataset, IncidentRecord, Provenance, Timestamp, TreatmentFlags};
use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result, RowError};

/// Header name for every incident field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub id: String,
    pub dispatch_time: String,
    /// Written for reference; ignored on load.
    pub arrival_time: String,
    pub response_time: String,
    pub latitude: String,
    pub longitude: String,
    pub urban: String,
    pub urgency: String,
    pub incident_type: String,
    pub patient_age: String,
    pub patient_gender: String,
    pub patient_race: String,
    pub has_insurance: String,
    pub area_median_income: String,
    pub area_poverty_rate: String,
    pub area_pct_college: String,
    pub area_pop_density: String,
    pub treat: String,
    pub post: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: "incident_id".into(),
            dispatch_time: "dispatch_time".into(),
            arrival_time: "arrival_time".into(),
            response_time: "response_time_minutes".into(),
            latitude: "lat".into(),
            longitude: "lon".into(),
            urban: "urban".into(),
            urgency: "urgency".into(),
            incident_type: "incident_type".into(),
            patient_age: "patient_age".into(),
            patient_gender: "patient_gender".into(),
            patient_race: "patient_race".into(),
            has_insurance: "has_insurance".into(),
            area_median_income: "area_median_income".into(),
            area_poverty_rate: "area_poverty_rate".into(),
            area_pct_college: "area_education_pct_college".into(),
            area_pop_density: "area_population_density".into(),
            treat: "treat".into(),
            post: "post".into(),
        }
    }
}

impl ColumnMap {
    fn required(&self) -> [&str; 16] {
        [
            &self.id,
            &self.dispatch_time,
            &self.response_time,
            &self.latitude,
            &self.longitude,
            &self.urban,
            &self.urgency,
            &self.incident_type,
            &self.patient_age,
            &self.patient_gender,
            &self.patient_race,
            &self.has_insurance,
            &self.area_median_income,
            &self.area_poverty_rate,
            &self.area_pct_college,
            &self.area_pop_density,
        ]
    }
}

/// What to do with rows that fail to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowPolicy {
    #[default]
    FailFast,
    /// Skip invalid rows and list them in the report.
    Collect,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub rows_read: usize,
    pub invalid: Vec<RowError>,
}

pub fn format_timestamp(t: Timestamp) -> String {
    match DateTime::from_timestamp(t.seconds(), 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => t.seconds().to_string(),
    }
}

/// RFC 3339, a naive `YYYY-MM-DD[T ]HH:MM:SS[.fff]` read as UTC, or a bare date.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(Timestamp(dt.timestamp()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Timestamp(dt.and_utc().timestamp()));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(|dt| Timestamp(dt.and_utc().timestamp()))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    row: usize,
}

impl Row<'_> {
    fn raw(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("")
    }

    fn fail(&self, column: &str, message: impl Into<String>) -> RowError {
        RowError { row: self.row, column: Some(column.into()), message: message.into() }
    }

    fn parse<T: FromStr>(&self, idx: usize, column: &str) -> std::result::Result<T, RowError> {
        let v = self.raw(idx).trim();
        v.parse().map_err(|_| self.fail(column, format!("cannot parse `{v}`")))
    }

    fn flag(&self, idx: usize, column: &str) -> std::result::Result<bool, RowError> {
        parse_bool(self.raw(idx)).ok_or_else(|| self.fail(column, format!("`{}` is not a 0/1 flag", self.raw(idx))))
    }
}

fn parse_row(
    row: &Row,
    cols: &ColumnMap,
    idx: &[usize; 16],
    flags: Option<(usize, usize)>,
) -> std::result::Result<IncidentRecord, RowError> {
    let names = cols.required();
    let dispatch = parse_timestamp(row.raw(idx[1]))
        .ok_or_else(|| row.fail(names[1], format!("`{}` is not an ISO-8601 timestamp", row.raw(idx[1]))))?;
    let response_time: f64 = row.parse(idx[2], names[2])?;
    if !(response_time > 0.0) || !response_time.is_finite() {
        return Err(row.fail(names[2], format!("response time {response_time} is not positive")));
    }
    let treatment = match flags {
        Some((t, p)) if !row.raw(t).trim().is_empty() || !row.raw(p).trim().is_empty() => {
            Some(TreatmentFlags { treated: row.flag(t, &cols.treat)?, post: row.flag(p, &cols.post)? })
        }
        _ => None,
    };
    Ok(IncidentRecord {
        id: row.raw(idx[0]).trim().to_string(),
        dispatch_time: dispatch,
        response_time,
        latitude: row.parse(idx[3], names[3])?,
        longitude: row.parse(idx[4], names[4])?,
        urban: row.flag(idx[5], names[5])?,
        urgency: row.parse(idx[6], names[6])?,
        incident_type: row.parse(idx[7], names[7])?,
        patient_age: row.parse(idx[8], names[8])?,
        patient_gender: row.parse(idx[9], names[9])?,
        patient_race: row.parse(idx[10], names[10])?,
        has_insurance: row.flag(idx[11], names[11])?,
        area_median_income: row.parse(idx[12], names[12])?,
        area_poverty_rate: row.parse(idx[13], names[13])?,
        area_pct_college: row.parse(idx[14], names[14])?,
        area_pop_density: row.parse(idx[15], names[15])?,
        treatment,
    })
}

/// Reads incidents, resolving columns through `columns`.
pub fn load_incidents(path: &Path, columns: &ColumnMap, policy: RowPolicy) -> Result<LoadReport> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| LabError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| LabError::csv(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = [0usize; 16];
    for (slot, name) in idx.iter_mut().zip(columns.required()) {
        *slot = find(name).ok_or_else(|| LabError::MissingColumn { path: path.into(), column: name.into() })?;
    }
    let flags = match (find(&columns.treat), find(&columns.post)) {
        (Some(t), Some(p)) => Some((t, p)),
        (None, None) => None,
        (Some(_), None) => return Err(LabError::MissingColumn { path: path.into(), column: columns.post.clone() }),
        (None, Some(_)) => return Err(LabError::MissingColumn { path: path.into(), column: columns.treat.clone() }),
    };
    let mut records = Vec::new();
    let mut invalid = Vec::new();
    let mut rows_read = 0;
    for (i, result) in reader.records().enumerate() {
        rows_read += 1;
        let raw = result.map_err(|e| LabError::csv(path, e))?;
        match parse_row(&Row { record: &raw, row: i + 1 }, columns, &idx, flags) {
            Ok(r) => records.push(r),
            Err(e) if policy == RowPolicy::Collect => invalid.push(e),
            Err(e) => return Err(LabError::Rows { path: path.into(), errors: vec![e] }),
        }
    }
    let dataset = Dataset::new(records, Provenance::Loaded, None)?;
    Ok(LoadReport { dataset, rows_read, invalid })
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes the canonical layout; `treat`/`post` appear only when some record carries flags.
pub fn write_incidents<W: Write>(out: W, dataset: &Dataset, columns: &ColumnMap) -> std::result::Result<(), csv::Error> {
    let with_flags = dataset.records().iter().any(|r| r.treatment.is_some());
    let mut w = csv::Writer::from_writer(out);
    let c = columns;
    let mut header: Vec<&str> = vec![&c.id, &c.dispatch_time, &c.arrival_time];
    header.extend_from_slice(&c.required()[2..]);
    if with_flags {
        header.extend([c.treat.as_str(), c.post.as_str()]);
    }
    w.write_record(&header)?;
    for r in dataset.records() {
        let arrival = Timestamp(r.dispatch_time.seconds() + (r.response_time * 60.0).round() as i64);
        let mut row = vec![
            r.id.clone(),
            format_timestamp(r.dispatch_time),
            format_timestamp(arrival),
            r.response_time.to_string(),
            r.latitude.to_string(),
            r.longitude.to_string(),
            flag(r.urban).into(),
            r.urgency.as_str().into(),
            r.incident_type.as_str().into(),
            r.patient_age.to_string(),
            r.patient_gender.as_str().into(),
            r.patient_race.as_str().into(),
            flag(r.has_insurance).into(),
            r.area_median_income.to_string(),
            r.area_poverty_rate.to_string(),
            r.area_pct_college.to_string(),
            r.area_pop_density.to_string(),
        ];
        if with_flags {
            match r.treatment {
                Some(f) => row.extend([flag(f.treated).into(), flag(f.post).into()]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_incidents(path: &Path, dataset: &Dataset, columns: &ColumnMap) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    write_incidents(std::io::BufWriter::new(file), dataset, columns).map_err(|e| LabError::csv(path, e))
}
