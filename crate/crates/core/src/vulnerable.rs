//! Who ends up in the slowest quarter of responses.
//!
//! Poor access means a response time strictly above the nearest-rank 75th
//! percentile. Income, poverty and education splits use the median over
//! incidents, not over distinct areas.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{AgeBand, Dataset, Gender, IncidentRecord};
use crate::{math, Error, Result};

pub const POOR_ACCESS_PERCENTILE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicShare {
    pub characteristic: String,
    pub share_poor_access: f64,
    pub share_overall: f64,
    /// `None` when nobody in the sample has the characteristic.
    pub overrepresentation_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub name: String,
    /// Categories partition the sample, so each share column sums to one.
    pub exhaustive: bool,
    pub rows: Vec<CharacteristicShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub statistic: String,
    pub poor_access: f64,
    pub overall: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerableProfile {
    /// Minutes.
    pub cutoff: f64,
    pub n_overall: usize,
    pub n_poor_access: usize,
    pub panels: Vec<Panel>,
    pub summary: Vec<SummaryRow>,
}

impl VulnerableProfile {
    pub fn row(&self, characteristic: &str) -> Option<&CharacteristicShare> {
        self.panels.iter().flat_map(|p| &p.rows).find(|r| r.characteristic == characteristic)
    }

    pub fn summary_row(&self, statistic: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.statistic == statistic)
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

struct Split<'a> {
    all: &'a [IncidentRecord],
    poor: Vec<&'a IncidentRecord>,
}

impl Split<'_> {
    fn share(&self, name: &str, pred: impl Fn(&IncidentRecord) -> bool) -> CharacteristicShare {
        let overall = self.all.iter().filter(|r| pred(r)).count() as f64 / self.all.len() as f64;
        let poor = self.poor.iter().filter(|r| pred(r)).count() as f64 / self.poor.len() as f64;
        CharacteristicShare {
            characteristic: name.to_string(),
            share_poor_access: poor,
            share_overall: overall,
            overrepresentation_ratio: ratio(poor, overall),
        }
    }

    fn summary(&self, name: &str, stat: impl Fn(&[f64]) -> f64, field: impl Fn(&IncidentRecord) -> f64) -> SummaryRow {
        let all: Vec<f64> = self.all.iter().map(&field).collect();
        let poor: Vec<f64> = self.poor.iter().map(|r| field(r)).collect();
        let (p, o) = (stat(&poor), stat(&all));
        SummaryRow { statistic: name.to_string(), poor_access: p, overall: o, ratio: ratio(p, o) }
    }
}

/// Shares of each characteristic among poor-access incidents against the whole sample.
pub fn vulnerable_profile(dataset: &Dataset) -> Result<VulnerableProfile> {
    let all = dataset.records();
    if all.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: all.len() });
    }
    let times = math::sorted_copy(&dataset.response_times());
    let cutoff = math::nearest_rank(&times, POOR_ACCESS_PERCENTILE).unwrap();
    let poor: Vec<&IncidentRecord> = all.iter().filter(|r| r.response_time > cutoff).collect();
    if poor.is_empty() {
        return Err(Error::ZeroVariance(format!("response_time: nothing lies above the quartile cutoff {cutoff}")));
    }
    let split = Split { all, poor };
    let column = |f: fn(&IncidentRecord) -> f64| all.iter().map(f).collect::<Vec<f64>>();
    let income_median = math::median(&column(|r| r.area_median_income)).unwrap();
    let poverty_median = math::median(&column(|r| r.area_poverty_rate)).unwrap();
    let college_median = math::median(&column(|r| r.area_pct_college)).unwrap();

    let ages: Vec<CharacteristicShare> =
        AgeBand::ALL.iter().map(|b| split.share(&format!("Age {}", b.as_str()), |r| r.age_band() == *b)).collect();
    let gender = [("Female", Gender::Female), ("Male", Gender::Male)].map(|(n, g)| split.share(n, |r| r.patient_gender == g));
    let panels = alloc::vec![
        Panel { name: "Age".into(), exhaustive: true, rows: ages },
        Panel { name: "Gender".into(), exhaustive: true, rows: gender.to_vec() },
        Panel {
            name: "Geography".into(),
            exhaustive: true,
            rows: alloc::vec![split.share("Urban", |r| r.urban), split.share("Rural", |r| !r.urban)],
        },
        Panel {
            name: "Socioeconomic status".into(),
            exhaustive: false,
            rows: alloc::vec![
                split.share("Below-median income", |r| r.area_median_income < income_median),
                split.share("High poverty", |r| r.area_poverty_rate > poverty_median),
                split.share("Low education", |r| r.area_pct_college < college_median),
            ],
        },
    ];
    let median = |xs: &[f64]| math::median(xs).unwrap();
    let summary = alloc::vec![
        SummaryRow { statistic: "N".into(), poor_access: split.poor.len() as f64, overall: all.len() as f64, ratio: None },
        SummaryRow { ratio: None, ..split.summary("Mean response time", math::mean, |r| r.response_time) },
        split.summary("Median income", median, |r| r.area_median_income),
        split.summary("Poverty rate", math::mean, |r| r.area_poverty_rate),
        split.summary("% College", math::mean, |r| r.area_pct_college),
    ];
    Ok(VulnerableProfile { cutoff, n_overall: all.len(), n_poor_access: split.poor.len(), panels, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::record;
    use crate::data::Provenance;
    use alloc::vec::Vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dataset(records: Vec<IncidentRecord>) -> Dataset {
        Dataset::new(records, Provenance::Loaded, None).unwrap()
    }

    fn with_times(times: &[f64]) -> Vec<IncidentRecord> {
        times.iter().enumerate().map(|(i, t)| record(&format!("r{i}"), *t)).collect()
    }

    #[test]
    fn hand_built_eight_records() {
        let mut rs = with_times(&[3.0, 9.0, 5.0, 12.0, 4.0, 7.0, 15.0, 6.0]);
        // sorted: 3 4 5 6 7 9 12 15; rank ceil(6) = 6 → cutoff 9; poor are 12 and 15
        for (i, r) in rs.iter_mut().enumerate() {
            r.urban = i % 2 == 0;
            r.patient_age = [30, 50, 70, 90, 30, 50, 70, 90][i];
            r.patient_gender = if i < 3 { Gender::Female } else { Gender::Male };
            r.area_median_income = 10_000.0 * (i + 1) as f64;
        }
        let p = vulnerable_profile(&dataset(rs)).unwrap();
        assert_eq!(p.cutoff, 9.0);
        assert_eq!((p.n_poor_access, p.n_overall), (2, 8));
        // poor: index 3 (age 90, male, rural, 40k) and 6 (age 70, male, urban, 70k)
        let urban = p.row("Urban").unwrap();
        assert_eq!((urban.share_poor_access, urban.share_overall), (0.5, 0.5));
        assert_eq!(p.row("Age 85+").unwrap().overrepresentation_ratio, Some(2.0));
        assert_eq!(p.row("Age 18-44").unwrap().overrepresentation_ratio, Some(0.0));
        assert_relative_eq!(p.row("Male").unwrap().overrepresentation_ratio.unwrap(), 1.0 / 0.625, epsilon = 1e-15);
        // income median is 45k, so only the 40k record is below it
        assert_eq!(p.row("Below-median income").unwrap().share_poor_access, 0.5);
        assert_eq!(p.summary_row("Median income").unwrap().poor_access, 55_000.0);
        assert_eq!(p.summary_row("Mean response time").unwrap().poor_access, 13.5);
    }

    #[test]
    fn single_category_has_unit_ratio() {
        let mut rs = with_times(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        rs.iter_mut().for_each(|r| r.urban = true);
        let p = vulnerable_profile(&dataset(rs)).unwrap();
        assert_eq!(p.row("Urban").unwrap().overrepresentation_ratio, Some(1.0));
        assert_eq!(p.row("Rural").unwrap().overrepresentation_ratio, None);
    }

    #[test]
    fn ratio_arithmetic() {
        assert_relative_eq!(ratio(0.057, 0.052).unwrap(), 1.096, epsilon = 1e-3);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(vulnerable_profile(&dataset(with_times(&[1.0, 2.0, 3.0]))), Err(Error::InsufficientData { .. })));
        assert!(matches!(vulnerable_profile(&dataset(with_times(&[2.0; 6]))), Err(Error::ZeroVariance(_))));
    }

    proptest! {
        #[test]
        fn exhaustive_panels_and_quartile_size(times in prop::collection::btree_set(1u32..100_000, 4..200), flags in prop::collection::vec(any::<(bool, u8)>(), 200)) {
            let t: Vec<f64> = times.iter().map(|v| f64::from(*v) / 100.0).collect();
            let mut rs = with_times(&t);
            for (r, (u, a)) in rs.iter_mut().zip(&flags) {
                r.urban = *u;
                r.patient_age = 18 + u32::from(*a) % 78;
                r.patient_gender = if a % 3 == 0 { Gender::Female } else { Gender::Male };
            }
            let p = vulnerable_profile(&dataset(rs)).unwrap();
            prop_assert_eq!(p.n_poor_access, t.len() / 4);
            for panel in p.panels.iter().filter(|p| p.exhaustive) {
                let a: f64 = panel.rows.iter().map(|r| r.share_poor_access).sum();
                let b: f64 = panel.rows.iter().map(|r| r.share_overall).sum();
                prop_assert!((a - 1.0).abs() < 1e-9 && (b - 1.0).abs() < 1e-9);
            }
            for row in p.panels.iter().flat_map(|p| &p.rows) {
                if let Some(q) = row.overrepresentation_ratio {
                    prop_assert!((q - row.share_poor_access / row.share_overall).abs() < 1e-15);
                }
            }
        }
    }
}
