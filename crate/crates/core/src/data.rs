//! Incident records, datasets, the effectiveness transform and descriptive tables.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn seconds(self) -> i64 {
        self.0
    }
}

/// Proleptic Gregorian calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CivilDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

impl CivilDate {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        let d = Self { year, month, day };
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(Error::invalid("date", format!("{d} is not a calendar date")));
        }
        Ok(d)
    }

    /// Days since 1970-01-01.
    pub fn days_from_epoch(self) -> i64 {
        // Hinnant's days_from_civil
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let m = i64::from(self.month);
        let mp = (m + 9) % 12;
        let doy = (153 * mp + 2) / 5 + i64::from(self.day) - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    pub fn from_days(days: i64) -> Self {
        let z = days + 719_468;
        let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
        let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
        let year = (yoe + era * 400 + i64::from(month <= 2)) as i32;
        Self { year, month, day }
    }

    /// Midnight UTC at the start of this date.
    pub fn start(self) -> Timestamp {
        Timestamp(self.days_from_epoch() * SECONDS_PER_DAY)
    }
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        _ => 0,
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for CivilDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("date", format!("`{s}` is not YYYY-MM-DD"));
        let mut parts = s.trim().splitn(3, '-');
        let y = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let m = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let d = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        CivilDate::new(y, m, d)
    }
}

impl Serialize for CivilDate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CivilDate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! labelled_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let t = s.trim();
                $(if t.eq_ignore_ascii_case($label) {
                    return Ok($name::$variant);
                })+
                Err(Error::invalid(stringify!($name), format!("unknown value `{t}`")))
            }
        }
    };
}

labelled_enum!(Urgency { Critical => "critical", Urgent => "urgent", Routine => "routine" });
labelled_enum!(IncidentType {
    Cardiac => "cardiac",
    Stroke => "stroke",
    Trauma => "trauma",
    Medical => "medical",
    Other => "other",
});
labelled_enum!(Gender { Male => "male", Female => "female" });
labelled_enum!(Race {
    White => "white",
    Black => "black",
    Hispanic => "hispanic",
    Asian => "asian",
    Other => "other",
});
labelled_enum!(
    /// Patient age bands used throughout the heterogeneity tables.
    AgeBand {
        From18To44 => "18-44",
        From45To64 => "45-64",
        From65To84 => "65-84",
        From85 => "85+",
    }
);

impl AgeBand {
    pub fn of(age: u32) -> Self {
        match age {
            0..=44 => AgeBand::From18To44,
            45..=64 => AgeBand::From45To64,
            65..=84 => AgeBand::From65To84,
            _ => AgeBand::From85,
        }
    }
}

/// Difference-in-differences assignment attached to a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentFlags {
    pub treated: bool,
    pub post: bool,
}

/// One emergency incident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub id: String,
    pub dispatch_time: Timestamp,
    /// Minutes from dispatch to arrival.
    pub response_time: f64,
    pub latitude: f64,
    pub longitude: f64,
    pub urban: bool,
    pub urgency: Urgency,
    pub incident_type: IncidentType,
    pub patient_age: u32,
    pub patient_gender: Gender,
    pub patient_race: Race,
    pub has_insurance: bool,
    /// Dollars.
    pub area_median_income: f64,
    /// Percent.
    pub area_poverty_rate: f64,
    /// Percent.
    pub area_pct_college: f64,
    /// Persons per km².
    pub area_pop_density: f64,
    #[serde(default)]
    pub treatment: Option<TreatmentFlags>,
}

impl IncidentRecord {
    /// Checks the field-level invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.response_time > 0.0) || !self.response_time.is_finite() {
            return Err(Error::NonPositiveTime { id: self.id.clone(), value: self.response_time });
        }
        if !(18..=95).contains(&self.patient_age) {
            return Err(Error::invalid("patient_age", format!("{} outside [18, 95]", self.patient_age)));
        }
        for (name, v) in [("area_poverty_rate", self.area_poverty_rate), ("area_pct_college", self.area_pct_college)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} outside [0, 100]")));
            }
        }
        Ok(())
    }

    pub fn age_band(&self) -> AgeBand {
        AgeBand::of(self.patient_age)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    Loaded,
}

/// Ordered, id-unique collection of incidents. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<IncidentRecord>,
    provenance: Provenance,
    seed: Option<u64>,
    treatment_time: Option<Timestamp>,
}

impl Dataset {
    pub fn new(records: Vec<IncidentRecord>, provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records, provenance, seed, treatment_time: None })
    }

    /// Records the treatment instant used for event-time binning.
    pub fn with_treatment_time(mut self, t: Timestamp) -> Self {
        self.treatment_time = Some(t);
        self
    }

    pub fn records(&self) -> &[IncidentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Explicit treatment instant, or the earliest post-period dispatch when
    /// only flags are known.
    pub fn treatment_time(&self) -> Option<Timestamp> {
        self.treatment_time.or_else(|| self.records.iter().filter(|r| r.treatment.is_some_and(|f| f.post)).map(|r| r.dispatch_time).min())
    }

    pub fn response_times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.response_time).collect()
    }

    /// Sub-dataset of the records matching `keep`, preserving order.
    pub fn filter<F: FnMut(&IncidentRecord) -> bool>(&self, mut keep: F) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            provenance: self.provenance,
            seed: self.seed,
            treatment_time: self.treatment_time,
        }
    }
}

/// Per-record response times and effectiveness values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessSeries {
    times: Vec<f64>,
    effectiveness: Vec<f64>,
}

/// `τ = 1 / (1 + t)`.
pub fn effectiveness(t: f64) -> f64 {
    1.0 / (1.0 + t)
}

impl EffectivenessSeries {
    /// Builds the series from times via the effectiveness transform.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::NonPositiveTime { id: format!("#{i}"), value: t });
            }
        }
        Ok(Self { times: times.to_vec(), effectiveness: times.iter().map(|&t| effectiveness(t)).collect() })
    }

    /// Arbitrary observed `(t, τ)` pairs, `t ≥ 0` and `τ ∈ (0, 1]`.
    pub fn from_observations(times: Vec<f64>, effectiveness: Vec<f64>) -> Result<Self> {
        if times.len() != effectiveness.len() {
            return Err(Error::invalid("effectiveness", "length differs from times"));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::invalid("times", format!("{t} is not a finite non-negative time")));
        }
        if let Some(v) = effectiveness.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::invalid("effectiveness", format!("{v} outside (0, 1]")));
        }
        Ok(Self { times, effectiveness })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.effectiveness
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Effectiveness for every record; fails on the first non-positive time.
pub fn compute_effectiveness(dataset: &Dataset) -> Result<EffectivenessSeries> {
    for r in dataset.records() {
        if !(r.response_time > 0.0) || !r.response_time.is_finite() {
            return Err(Error::NonPositiveTime { id: r.id.clone(), value: r.response_time });
        }
    }
    EffectivenessSeries::from_times(&dataset.response_times())
}

/// Incidents strictly beyond one response-time threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageGapReport {
    pub threshold: f64,
    pub count_beyond: usize,
    pub fraction_beyond: f64,
    pub mean_time_beyond: Option<f64>,
    pub sd_time_beyond: Option<f64>,
}

pub fn coverage_gaps(dataset: &Dataset, thresholds: &[f64]) -> Result<Vec<CoverageGapReport>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if thresholds.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("thresholds", "must be positive"));
    }
    if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("thresholds", "must be strictly increasing"));
    }
    let times = dataset.response_times();
    let n = times.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let beyond: Vec<f64> = times.iter().copied().filter(|t| *t > threshold).collect();
            CoverageGapReport {
                threshold,
                count_beyond: beyond.len(),
                fraction_beyond: beyond.len() as f64 / n,
                mean_time_beyond: (!beyond.is_empty()).then(|| math::mean(&beyond)),
                sd_time_beyond: math::sample_sd(&beyond),
            }
        })
        .collect())
}

/// Mean, sample sd, min and max of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Option<Self> {
        let (min, max) = math::min_max(xs)?;
        Some(Self { mean: math::mean(xs), sd: math::sample_sd(xs), min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub category: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdShare {
    pub threshold: f64,
    pub share_below: f64,
}

/// Descriptive statistics laid out like the summary-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub response_time: Moments,
    pub response_within: Vec<ThresholdShare>,
    pub urgency: Vec<CategoryShare>,
    pub urban_share: f64,
    pub rural_share: f64,
    pub latitude: Moments,
    pub longitude: Moments,
    pub patient_age: Moments,
    pub age_bands: Vec<CategoryShare>,
    pub gender: Vec<CategoryShare>,
    pub race: Vec<CategoryShare>,
    pub insured_share: f64,
    pub area_median_income: Moments,
    pub area_poverty_rate: Moments,
    pub area_pct_college: Moments,
    pub area_pop_density: Moments,
}

fn shares<T: Copy + PartialEq + fmt::Display>(all: &[T], values: impl Iterator<Item = T> + Clone, n: f64) -> Vec<CategoryShare> {
    all.iter().map(|c| CategoryShare { category: c.to_string(), share: values.clone().filter(|v| v == c).count() as f64 / n }).collect()
}

fn field_moments(dataset: &Dataset, f: impl Fn(&IncidentRecord) -> f64) -> Moments {
    let v: Vec<f64> = dataset.records().iter().map(f).collect();
    // non-empty checked by the caller
    Moments::of(&v).unwrap()
}

pub fn summarize_dataset(dataset: &Dataset) -> Result<DatasetSummary> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let recs = dataset.records();
    let n = recs.len() as f64;
    let times = dataset.response_times();
    let urban = recs.iter().filter(|r| r.urban).count() as f64 / n;
    Ok(DatasetSummary {
        n: recs.len(),
        response_time: field_moments(dataset, |r| r.response_time),
        response_within: [8.0, 15.0, 30.0]
            .iter()
            .map(|&threshold| ThresholdShare { threshold, share_below: times.iter().filter(|t| **t < threshold).count() as f64 / n })
            .collect(),
        urgency: shares(Urgency::ALL, recs.iter().map(|r| r.urgency), n),
        urban_share: urban,
        rural_share: 1.0 - urban,
        latitude: field_moments(dataset, |r| r.latitude),
        longitude: field_moments(dataset, |r| r.longitude),
        patient_age: field_moments(dataset, |r| f64::from(r.patient_age)),
        age_bands: shares(AgeBand::ALL, recs.iter().map(IncidentRecord::age_band), n),
        gender: shares(Gender::ALL, recs.iter().map(|r| r.patient_gender), n),
        race: shares(Race::ALL, recs.iter().map(|r| r.patient_race), n),
        insured_share: recs.iter().filter(|r| r.has_insurance).count() as f64 / n,
        area_median_income: field_moments(dataset, |r| r.area_median_income),
        area_poverty_rate: field_moments(dataset, |r| r.area_poverty_rate),
        area_pct_college: field_moments(dataset, |r| r.area_pct_college),
        area_pop_density: field_moments(dataset, |r| r.area_pop_density),
    })
}
