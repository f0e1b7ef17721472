//! Calibrated synthetic incident generator and DiD treatment injection.
//!
//! Response times are log-normal per urgency level, moment-matched to the
//! configured mean and a shared target standard deviation:
//! `σ² = ln(1 + s²/m²)`, `μ = ln m − σ²/2`. Draws are clamped to the
//! configured bounds afterwards. Demographics follow the configured shares;
//! the urban flag shifts area income and education means by fixed offsets
//! (centred on the urban share so the pooled means are preserved) and
//! patients aged 65 or over are always insured.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    AgeBand, CivilDate, Dataset, Gender, IncidentRecord, IncidentType, Provenance, Race, Timestamp, TreatmentFlags, Urgency,
    SECONDS_PER_DAY,
};
use crate::{Error, Result};

const SHARE_TOL: f64 = 1e-9;

/// One value per urgency level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrgencyTable<T> {
    pub critical: T,
    pub urgent: T,
    pub routine: T,
}

impl<T: Copy> UrgencyTable<T> {
    pub fn get(&self, u: Urgency) -> T {
        match u {
            Urgency::Critical => self.critical,
            Urgency::Urgent => self.urgent,
            Urgency::Routine => self.routine,
        }
    }
}

/// Shares over the five incident types, in `IncidentType::ALL` order.
pub type TypeShares = [f64; 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    fn apply(self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

/// Normal draw clamped to bounds, optionally shifted for urban records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaVariable {
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub urban_offset: f64,
    pub bounds: Bounds,
}

/// Log-normal draw (parameters on the log scale) clamped to bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalVariable {
    pub log_mean: f64,
    pub log_sd: f64,
    #[serde(default)]
    pub urban_log_offset: f64,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n: usize,
    pub start_date: CivilDate,
    /// Inclusive last day of the window.
    pub end_date: CivilDate,
    pub urgency_means: UrgencyTable<f64>,
    pub target_sd: f64,
    pub clamp: Bounds,
    pub urban_share: f64,
    pub urgency_shares: UrgencyTable<f64>,
    pub incident_type_shares: UrgencyTable<TypeShares>,
    /// Shares of the four age bands, youngest first.
    pub age_band_shares: [f64; 4],
    pub female_share: f64,
    /// White, black, hispanic, asian, other.
    pub race_shares: [f64; 5],
    /// Insurance probability below age 65.
    pub insured_under_65: f64,
    pub latitude: AreaVariable,
    pub longitude: AreaVariable,
    pub income: AreaVariable,
    pub poverty_rate: AreaVariable,
    pub pct_college: AreaVariable,
    pub pop_density: LogNormalVariable,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            start_date: CivilDate { year: 2024, month: 1, day: 1 },
            end_date: CivilDate { year: 2024, month: 2, day: 4 },
            urgency_means: UrgencyTable { critical: 7.8, urgent: 7.9, routine: 7.7 },
            target_sd: 6.96,
            clamp: Bounds { min: 0.01, max: 49.99 },
            urban_share: 0.696,
            urgency_shares: UrgencyTable { critical: 0.508, urgent: 0.242, routine: 0.250 },
            incident_type_shares: UrgencyTable {
                critical: [0.45, 0.05, 0.35, 0.10, 0.05],
                urgent: [0.10, 0.35, 0.25, 0.25, 0.05],
                routine: [0.02, 0.03, 0.20, 0.55, 0.20],
            },
            age_band_shares: [0.397, 0.272, 0.280, 0.051],
            female_share: 0.529,
            race_shares: [0.604, 0.135, 0.175, 0.059, 0.027],
            // 92.1% overall when 65+ (33.1%) are always insured
            insured_under_65: 0.8819,
            latitude: AreaVariable { mean: 39.82, sd: 5.3, urban_offset: 0.0, bounds: Bounds { min: 25.0, max: 49.0 } },
            longitude: AreaVariable { mean: -95.15, sd: 16.0, urban_offset: 0.0, bounds: Bounds { min: -125.0, max: -65.0 } },
            income: AreaVariable { mean: 51_500.0, sd: 30_000.0, urban_offset: 12_000.0, bounds: Bounds { min: 20_000.0, max: 150_000.0 } },
            poverty_rate: AreaVariable { mean: 29.5, sd: 16.0, urban_offset: 0.0, bounds: Bounds { min: 0.1, max: 60.0 } },
            pct_college: AreaVariable { mean: 56.0, sd: 23.5, urban_offset: 10.0, bounds: Bounds { min: 0.4, max: 100.0 } },
            pop_density: LogNormalVariable {
                log_mean: 5.443,
                log_sd: 1.315,
                urban_log_offset: 1.0,
                bounds: Bounds { min: 0.3, max: 9952.1 },
            },
            seed: 0,
        }
    }
}

/// Log-scale parameters `(μ, σ)` whose log-normal has the given mean and sd.
pub fn lognormal_params(mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0) || !mean.is_finite() || !(sd >= 0.0) || !sd.is_finite() {
        return Err(Error::Config(format!("no log-normal has mean {mean} and sd {sd}")));
    }
    let s2 = (1.0 + (sd * sd) / (mean * mean)).ln();
    Ok((mean.ln() - 0.5 * s2, s2.sqrt()))
}

fn check_shares(name: &str, shares: &[f64]) -> Result<()> {
    if shares.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Config(format!("{name} shares must be non-negative")));
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > SHARE_TOL {
        return Err(Error::Config(format!("{name} shares sum to {total}, expected 1")));
    }
    Ok(())
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let u = &self.urgency_shares;
        check_shares("urgency", &[u.critical, u.urgent, u.routine])?;
        for urg in Urgency::ALL {
            check_shares("incident type", &self.incident_type_shares.get(*urg))?;
            lognormal_params(self.urgency_means.get(*urg), self.target_sd)?;
        }
        check_shares("age band", &self.age_band_shares)?;
        check_shares("race", &self.race_shares)?;
        check_probability("urban_share", self.urban_share)?;
        check_probability("female_share", self.female_share)?;
        check_probability("insured_under_65", self.insured_under_65)?;
        if !(self.clamp.min > 0.0 && self.clamp.max > self.clamp.min) {
            return Err(Error::Config(format!("clamp bounds ({}, {}) must be positive and ordered", self.clamp.min, self.clamp.max)));
        }
        for (name, v) in [
            ("latitude", &self.latitude),
            ("longitude", &self.longitude),
            ("income", &self.income),
            ("poverty_rate", &self.poverty_rate),
            ("pct_college", &self.pct_college),
        ] {
            if !(v.sd >= 0.0) || !(v.bounds.max >= v.bounds.min) {
                return Err(Error::Config(format!("{name}: sd must be non-negative and bounds ordered")));
            }
        }
        if !(self.pop_density.log_sd >= 0.0) || !(self.pop_density.bounds.max >= self.pop_density.bounds.min) {
            return Err(Error::Config("pop_density: sd must be non-negative and bounds ordered".into()));
        }
        if self.end_date < self.start_date {
            return Err(Error::Config("end_date precedes start_date".into()));
        }
        Ok(())
    }

    pub fn window_start(&self) -> Timestamp {
        self.start_date.start()
    }

    /// Exclusive end of the window: midnight after `end_date`.
    pub fn window_end(&self) -> Timestamp {
        Timestamp(self.end_date.start().seconds() + SECONDS_PER_DAY)
    }

    pub fn window_midpoint(&self) -> Timestamp {
        let (a, b) = (self.window_start().seconds(), self.window_end().seconds());
        Timestamp(a + (b - a) / 2)
    }
}

fn pick<R: Rng>(rng: &mut R, shares: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, s) in shares.iter().enumerate() {
        acc += s;
        if u < acc {
            return i;
        }
    }
    // rounding in the cumulative sum; take the last non-empty category
    shares.iter().rposition(|s| *s > 0.0).unwrap_or(0)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_area<R: Rng>(rng: &mut R, v: &AreaVariable, urban: bool, urban_share: f64) -> f64 {
    let shift = v.urban_offset * (f64::from(u8::from(urban)) - urban_share);
    v.bounds.apply(v.mean + shift + v.sd * normal(rng))
}

/// Generates `config.n` incidents; deterministic in the config (including its seed).
pub fn simulate_incidents(config: &SimulationConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = config.window_start().seconds();
    let end = config.window_end().seconds();
    let log_params = UrgencyTable {
        critical: lognormal_params(config.urgency_means.critical, config.target_sd)?,
        urgent: lognormal_params(config.urgency_means.urgent, config.target_sd)?,
        routine: lognormal_params(config.urgency_means.routine, config.target_sd)?,
    };
    let urgency_shares = [config.urgency_shares.critical, config.urgency_shares.urgent, config.urgency_shares.routine];
    let age_ranges = [(18u32, 44u32), (45, 64), (65, 84), (85, 95)];

    let mut records = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let dispatch = Timestamp(rng.random_range(start..end));
        let urgency = Urgency::ALL[pick(&mut rng, &urgency_shares)];
        let incident_type = IncidentType::ALL[pick(&mut rng, &config.incident_type_shares.get(urgency))];
        let (mu, sigma) = log_params.get(urgency);
        let z = normal(&mut rng);
        let raw = if sigma == 0.0 { config.urgency_means.get(urgency) } else { (mu + sigma * z).exp() };
        let response_time = config.clamp.apply(raw);

        let urban = rng.random::<f64>() < config.urban_share;
        let latitude = draw_area(&mut rng, &config.latitude, urban, config.urban_share);
        let longitude = draw_area(&mut rng, &config.longitude, urban, config.urban_share);

        let band = pick(&mut rng, &config.age_band_shares);
        let (lo, hi) = age_ranges[band];
        let patient_age = rng.random_range(lo..=hi);
        let patient_gender = if rng.random::<f64>() < config.female_share { Gender::Female } else { Gender::Male };
        let patient_race = Race::ALL[pick(&mut rng, &config.race_shares)];
        let insured_draw = rng.random::<f64>() < config.insured_under_65;
        let has_insurance = patient_age >= 65 || insured_draw;

        let area_median_income = draw_area(&mut rng, &config.income, urban, config.urban_share);
        let area_poverty_rate = draw_area(&mut rng, &config.poverty_rate, urban, config.urban_share);
        let area_pct_college = draw_area(&mut rng, &config.pct_college, urban, config.urban_share);
        let d = &config.pop_density;
        let log_shift = d.urban_log_offset * (f64::from(u8::from(urban)) - config.urban_share);
        let area_pop_density = d.bounds.apply((d.log_mean + log_shift + d.log_sd * normal(&mut rng)).exp());

        debug_assert_eq!(AgeBand::of(patient_age), AgeBand::ALL[band]);
        records.push(IncidentRecord {
            id: format!("INC{:06}", i + 1),
            dispatch_time: dispatch,
            response_time,
            latitude,
            longitude,
            urban,
            urgency,
            incident_type,
            patient_age,
            patient_gender,
            patient_race,
            has_insurance,
            area_median_income,
            area_poverty_rate,
            area_pct_college,
            area_pop_density,
            treatment: None,
        });
    }
    Dataset::new(records, Provenance::Simulated, Some(config.seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Treated when latitude is strictly above the sample median.
    LatitudeAboveMedian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreatmentSpec {
    pub split_rule: SplitRule,
    /// `None` takes the midpoint of the observed dispatch span.
    pub treatment_time: Option<Timestamp>,
    /// Minutes added to treated post-period response times.
    pub effect: f64,
    pub noise_sd: f64,
    /// Shifted times are floored here.
    pub floor: f64,
}

impl Default for TreatmentSpec {
    fn default() -> Self {
        Self { split_rule: SplitRule::LatitudeAboveMedian, treatment_time: None, effect: -1.5, noise_sd: 0.3, floor: 0.01 }
    }
}

/// Flags every record as treated/post and shifts treated post-period times.
pub fn inject_did_treatment(dataset: &Dataset, spec: &TreatmentSpec, seed: u64) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(Error::invalid("noise_sd", format!("{} is negative", spec.noise_sd)));
    }
    let treatment_time = spec.treatment_time.unwrap_or_else(|| {
        let lo = dataset.records().iter().map(|r| r.dispatch_time).min().unwrap();
        let hi = dataset.records().iter().map(|r| r.dispatch_time).max().unwrap();
        Timestamp(lo.seconds() + (hi.seconds() - lo.seconds()) / 2)
    });
    if dataset.records().iter().all(|r| r.dispatch_time < treatment_time) {
        return Err(Error::NoPostPeriod);
    }
    let lat_median = match spec.split_rule {
        SplitRule::LatitudeAboveMedian => {
            crate::math::median(&dataset.records().iter().map(|r| r.latitude).collect::<Vec<_>>()).ok_or(Error::EmptyDataset)?
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = dataset
        .records()
        .iter()
        .map(|r| {
            let flags = TreatmentFlags { treated: r.latitude > lat_median, post: r.dispatch_time >= treatment_time };
            let mut out = r.clone();
            if flags.treated && flags.post {
                let shift = spec.effect + spec.noise_sd * normal(&mut rng);
                if shift != 0.0 {
                    out.response_time = (r.response_time + shift).max(spec.floor);
                }
            }
            out.treatment = Some(flags);
            out
        })
        .collect();
    Ok(Dataset::new(records, dataset.provenance(), dataset.seed())?.with_treatment_time(treatment_time))
}
