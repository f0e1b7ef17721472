//! Exponential decay of effectiveness, critical boundaries and group heterogeneity.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::data::{AgeBand, Dataset, EffectivenessSeries, Gender, IncidentRecord, Race, Urgency};
use crate::math;
use crate::ols::{self, Design};
use crate::{Error, Result};

/// Normal quantile used for 95% intervals.
pub const Z_95: f64 = 1.96;

/// Default effectiveness threshold for critical boundaries.
pub const DEFAULT_EPSILON: f64 = 0.10;

/// `τ(t) = τ₀ exp(−λ t)` fitted on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau0: f64,
    pub lambda: f64,
    /// Delta-method SE of `τ₀ = exp(intercept)`.
    pub se_tau0: f64,
    pub se_lambda: f64,
    pub r_squared: f64,
    pub n: usize,
    /// Log-scale residuals, one per observation.
    pub residuals: Vec<f64>,
}

/// Log-linear OLS of `ln τ` on `[1, t]` with HC1 standard errors.
pub fn fit_exponential_decay(series: &EffectivenessSeries) -> Result<DecayFit> {
    let n = series.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if let Some(v) = series.values().iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::invalid("effectiveness", format!("{v} outside (0, 1]")));
    }
    let y: Vec<f64> = series.values().iter().map(|v| v.ln()).collect();
    let mut design = Design::with_intercept(n);
    design.push("time", series.times().to_vec());
    let fit = ols::fit(&design, &y)?;
    let se = fit.robust_se();
    let tau0 = fit.coefficients[0].exp();
    Ok(DecayFit {
        tau0,
        lambda: -fit.coefficients[1],
        se_tau0: tau0 * se[0],
        se_lambda: se[1],
        r_squared: fit.r_squared,
        n,
        residuals: fit.residuals,
    })
}

/// Convention for the threshold in the boundary formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryForm {
    /// `d* = −ln(ε/τ₀)/λ`: distance at which effectiveness falls to `ε`.
    #[default]
    RelativeToBaseline,
    /// `d* = −ln(ε)/λ`, ignoring the baseline.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub d_star: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub epsilon: f64,
}

/// Critical boundary with delta-method SE `|ln(ε/τ₀)|/λ² · se_λ` (τ₀ held fixed).
pub fn critical_boundary(fit: &DecayFit, epsilon: f64) -> Result<BoundaryEstimate> {
    critical_boundary_with(fit, epsilon, BoundaryForm::RelativeToBaseline)
}

pub fn critical_boundary_with(fit: &DecayFit, epsilon: f64, form: BoundaryForm) -> Result<BoundaryEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} is not positive")));
    }
    let reference = match form {
        BoundaryForm::RelativeToBaseline => fit.tau0,
        BoundaryForm::Absolute => 1.0,
    };
    if epsilon >= reference {
        return Err(Error::BoundaryUndefined { epsilon, tau0: reference });
    }
    if !(fit.lambda > 0.0) {
        return Err(Error::NonPositiveDecay { lambda: fit.lambda });
    }
    let log_ratio = (epsilon / reference).ln();
    let d_star = -log_ratio / fit.lambda;
    let se = log_ratio.abs() / (fit.lambda * fit.lambda) * fit.se_lambda;
    Ok(BoundaryEstimate { d_star, se, ci_lower: d_star - Z_95 * se, ci_upper: d_star + Z_95 * se, epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Urgency,
    AgeBand,
    Gender,
    Race,
    IncomeTertile,
    EducationTertile,
    PovertyTertile,
    UrbanRural,
}

impl Grouping {
    pub const ALL: &'static [Grouping] = &[
        Grouping::Urgency,
        Grouping::AgeBand,
        Grouping::Gender,
        Grouping::Race,
        Grouping::IncomeTertile,
        Grouping::EducationTertile,
        Grouping::PovertyTertile,
        Grouping::UrbanRural,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Urgency => "urgency",
            Grouping::AgeBand => "age_band",
            Grouping::Gender => "gender",
            Grouping::Race => "race",
            Grouping::IncomeTertile => "income_tertile",
            Grouping::EducationTertile => "education_tertile",
            Grouping::PovertyTertile => "poverty_tertile",
            Grouping::UrbanRural => "urban_rural",
        }
    }
}

impl core::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Grouping::ALL
            .iter()
            .copied()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("grouping", format!("unknown grouping `{s}`")))
    }
}

const TERTILE_LABELS: [&str; 3] = ["low", "middle", "high"];

/// Nearest-rank terciles: `x ≤ q⅓` is low, `x ≤ q⅔` middle, the rest high.
fn tertile_cuts(xs: &[f64]) -> (f64, f64) {
    let s = math::sorted_copy(xs);
    (math::nearest_rank(&s, 1.0 / 3.0).unwrap(), math::nearest_rank(&s, 2.0 / 3.0).unwrap())
}

fn tertile(x: f64, (q1, q2): (f64, f64)) -> usize {
    if x <= q1 {
        0
    } else if x <= q2 {
        1
    } else {
        2
    }
}

/// Group labels in presentation order and each record's label index.
fn assign_groups(dataset: &Dataset, grouping: Grouping) -> (Vec<String>, Vec<usize>) {
    let recs = dataset.records();
    fn labels<T: core::fmt::Display>(all: &[T]) -> Vec<String> {
        all.iter().map(ToString::to_string).collect()
    }
    fn pos<T: PartialEq>(all: &[T], v: &T) -> usize {
        all.iter().position(|x| x == v).unwrap()
    }
    let by_tertile = |f: fn(&IncidentRecord) -> f64| {
        let xs: Vec<f64> = recs.iter().map(f).collect();
        let cuts = tertile_cuts(&xs);
        (TERTILE_LABELS.iter().map(|s| s.to_string()).collect(), xs.iter().map(|&x| tertile(x, cuts)).collect())
    };
    match grouping {
        Grouping::Urgency => (labels(Urgency::ALL), recs.iter().map(|r| pos(Urgency::ALL, &r.urgency)).collect()),
        Grouping::AgeBand => (labels(AgeBand::ALL), recs.iter().map(|r| pos(AgeBand::ALL, &r.age_band())).collect()),
        Grouping::Gender => (labels(Gender::ALL), recs.iter().map(|r| pos(Gender::ALL, &r.patient_gender)).collect()),
        Grouping::Race => (labels(Race::ALL), recs.iter().map(|r| pos(Race::ALL, &r.patient_race)).collect()),
        Grouping::IncomeTertile => by_tertile(|r| r.area_median_income),
        Grouping::EducationTertile => by_tertile(|r| r.area_pct_college),
        Grouping::PovertyTertile => by_tertile(|r| r.area_poverty_rate),
        Grouping::UrbanRural => {
            (alloc::vec!["urban".to_string(), "rural".to_string()], recs.iter().map(|r| usize::from(!r.urban)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub label: String,
    pub n: usize,
    pub mean_time: f64,
    pub sd_time: f64,
    pub fit: DecayFit,
    /// `None` when the group's fit admits no boundary at the threshold.
    pub boundary: Option<BoundaryEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub grouping: Grouping,
    pub epsilon: f64,
    pub groups: Vec<GroupFit>,
    pub min_group_size: usize,
}

/// Minimum members per group for a decay fit.
pub const MIN_GROUP_SIZE: usize = 3;

/// Separate decay fits per observed group; boundaries at `epsilon`.
pub fn fit_by_group(dataset: &Dataset, grouping: Grouping, epsilon: f64) -> Result<GroupComparison> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (labels, assignment) = assign_groups(dataset, grouping);
    let mut members: Vec<Vec<f64>> = alloc::vec![Vec::new(); labels.len()];
    for (r, &g) in dataset.records().iter().zip(&assignment) {
        members[g].push(r.response_time);
    }
    let mut groups = Vec::new();
    for (label, times) in labels.into_iter().zip(members) {
        if times.is_empty() {
            continue;
        }
        if times.len() < MIN_GROUP_SIZE {
            return Err(Error::GroupTooSmall { group: label, size: times.len(), needed: MIN_GROUP_SIZE });
        }
        let series = EffectivenessSeries::from_times(&times)?;
        let fit = fit_exponential_decay(&series).map_err(|e| match e {
            Error::Singular { .. } => Error::ZeroVariance(format!("response times of group `{label}`")),
            other => other,
        })?;
        let boundary = critical_boundary(&fit, epsilon).ok();
        groups.push(GroupFit {
            n: times.len(),
            mean_time: math::mean(&times),
            sd_time: math::sample_sd(&times).unwrap_or(0.0),
            label,
            fit,
            boundary,
        });
    }
    let min_group_size = groups.iter().map(|g| g.n).min().unwrap_or(0);
    Ok(GroupComparison { grouping, epsilon, groups, min_group_size })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestTarget {
    MeanTime,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    T,
    AnovaF,
    /// Inverse-variance Wald test of equal decay rates across groups.
    WaldChi2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTest {
    pub target: TestTarget,
    pub kind: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom; two entries for the F test.
    pub df: Vec<f64>,
}

/// Two groups: Welch-style t. More groups: one-way ANOVA F on response
/// times, or a Wald chi-square on the decay rates.
pub fn test_group_differences(cmp: &GroupComparison, target: TestTarget) -> Result<GroupTest> {
    let g = &cmp.groups;
    if g.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: g.len() });
    }
    if target == TestTarget::MeanTime {
        if let Some(z) = g.iter().find(|x| !(x.sd_time > 0.0)) {
            return Err(Error::ZeroVariance(format!("response times of group `{}`", z.label)));
        }
    }
    match (target, g.len()) {
        (TestTarget::MeanTime, 2) => {
            let (a, b) = (&g[0], &g[1]);
            let va = a.sd_time * a.sd_time / a.n as f64;
            let vb = b.sd_time * b.sd_time / b.n as f64;
            let t = (a.mean_time - b.mean_time) / (va + vb).sqrt();
            let df = (va + vb).powi(2) / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
            Ok(GroupTest { target, kind: TestKind::T, statistic: t, p_value: math::student_t_two_sided_p(t, df), df: alloc::vec![df] })
        }
        (TestTarget::Lambda, 2) => {
            let (a, b) = (&g[0].fit, &g[1].fit);
            let var = a.se_lambda * a.se_lambda + b.se_lambda * b.se_lambda;
            let diff = a.lambda - b.lambda;
            if !(var > 0.0) {
                return Err(Error::ZeroVariance("decay-rate standard errors".into()));
            }
            let t = diff / var.sqrt();
            let df = (a.n + b.n - 4) as f64;
            let p = if df > 0.0 { math::student_t_two_sided_p(t, df) } else { math::normal_two_sided_p(t) };
            Ok(GroupTest { target, kind: TestKind::T, statistic: t, p_value: p, df: alloc::vec![df] })
        }
        (TestTarget::MeanTime, k) => {
            let n_total: usize = g.iter().map(|x| x.n).sum();
            let grand = g.iter().map(|x| x.n as f64 * x.mean_time).sum::<f64>() / n_total as f64;
            let ssb: f64 = g.iter().map(|x| x.n as f64 * (x.mean_time - grand).powi(2)).sum();
            let ssw: f64 = g.iter().map(|x| (x.n - 1) as f64 * x.sd_time * x.sd_time).sum();
            let df1 = (k - 1) as f64;
            let df2 = (n_total - k) as f64;
            let f = (ssb / df1) / (ssw / df2);
            Ok(GroupTest { target, kind: TestKind::AnovaF, statistic: f, p_value: math::f_sf(f, df1, df2), df: alloc::vec![df1, df2] })
        }
        (TestTarget::Lambda, k) => {
            if let Some(z) = g.iter().find(|x| !(x.fit.se_lambda > 0.0)) {
                return Err(Error::ZeroVariance(format!("decay-rate standard error of group `{}`", z.label)));
            }
            let w: Vec<f64> = g.iter().map(|x| 1.0 / (x.fit.se_lambda * x.fit.se_lambda)).collect();
            let pooled = g.iter().zip(&w).map(|(x, w)| w * x.fit.lambda).sum::<f64>() / w.iter().sum::<f64>();
            let chi2: f64 = g.iter().zip(&w).map(|(x, w)| w * (x.fit.lambda - pooled).powi(2)).sum();
            let df = (k - 1) as f64;
            Ok(GroupTest { target, kind: TestKind::WaldChi2, statistic: chi2, p_value: math::chi2_sf(chi2, df), df: alloc::vec![df] })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::{dataset_of_times, record};
    use crate::data::Provenance;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(t: &[f64], tau: &[f64]) -> EffectivenessSeries {
        EffectivenessSeries::from_observations(t.to_vec(), tau.to_vec()).unwrap()
    }

    fn fit_of(tau0: f64, lambda: f64, se_lambda: f64) -> DecayFit {
        DecayFit { tau0, lambda, se_tau0: 0.0, se_lambda, r_squared: 1.0, n: 10, residuals: vec![] }
    }

    #[test]
    fn exact_two_parameter_fit() {
        let e = core::f64::consts::E;
        let f = fit_exponential_decay(&series(&[0.0, 1.0, 2.0], &[1.0, 1.0 / e, 1.0 / (e * e)])).unwrap();
        assert_relative_eq!(f.tau0, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.lambda, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_recovery_of_calibrated_parameters() {
        let t: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        let tau: Vec<f64> = t.iter().map(|t| 0.7781 * (-0.3448 * t).exp()).collect();
        let f = fit_exponential_decay(&series(&t, &tau)).unwrap();
        assert_relative_eq!(f.tau0, 0.7781, epsilon = 1e-10);
        assert_relative_eq!(f.lambda, 0.3448, epsilon = 1e-10);
        assert!(math::mean(&f.residuals).abs() < 1e-10);
    }

    #[test]
    fn fit_preconditions() {
        assert_eq!(fit_exponential_decay(&series(&[1.0, 2.0], &[0.5, 0.3])).unwrap_err(), Error::InsufficientData { needed: 3, got: 2 });
        assert!(matches!(fit_exponential_decay(&series(&[2.0, 2.0, 2.0], &[0.5, 0.3, 0.2])), Err(Error::Singular { .. })));
    }

    #[test]
    fn boundary_examples() {
        let b = critical_boundary(&fit_of(0.7781, 0.3448, 0.0231), 0.10).unwrap();
        assert!((b.d_star - 5.95).abs() < 0.005);
        // |ln(0.1/0.7781)| / 0.3448² · 0.0231
        let se = (0.1f64 / 0.7781).ln().abs() / (0.3448 * 0.3448) * 0.0231;
        assert_relative_eq!(b.se, se, epsilon = 1e-15);
        assert!((b.se - 0.399).abs() < 0.001);
        assert_relative_eq!(b.ci_upper - b.d_star, 1.96 * se, epsilon = 1e-14);

        let e2 = (-2.0f64).exp();
        let b = critical_boundary(&fit_of(1.0, 1.0, 0.1), e2).unwrap();
        assert_relative_eq!(b.d_star, 2.0, epsilon = 1e-14);

        let abs = critical_boundary_with(&fit_of(0.7781, 0.3448, 0.0231), 0.10, BoundaryForm::Absolute).unwrap();
        assert_relative_eq!(abs.d_star, -(0.1f64).ln() / 0.3448, epsilon = 1e-14);
    }

    #[test]
    fn boundary_errors() {
        assert_eq!(critical_boundary(&fit_of(0.5, 0.3, 0.01), 0.6).unwrap_err(), Error::BoundaryUndefined { epsilon: 0.6, tau0: 0.5 });
        assert_eq!(critical_boundary(&fit_of(0.5, -0.1, 0.01), 0.1).unwrap_err(), Error::NonPositiveDecay { lambda: -0.1 });
    }

    fn grouped(times_by_group: &[(&[f64], u32)]) -> Dataset {
        let mut recs = Vec::new();
        for (times, age) in times_by_group {
            for t in *times {
                let mut r = record(&format!("r{}", recs.len()), *t);
                r.patient_age = *age;
                recs.push(r);
            }
        }
        Dataset::new(recs, Provenance::Loaded, None).unwrap()
    }

    #[test]
    fn single_group_equals_pooled() {
        let ds = dataset_of_times(&[1.0, 3.0, 4.5, 8.0, 12.0, 2.2]);
        let cmp = fit_by_group(&ds, Grouping::Urgency, 0.1).unwrap();
        assert_eq!(cmp.groups.len(), 1);
        let pooled = fit_exponential_decay(&EffectivenessSeries::from_times(&ds.response_times()).unwrap()).unwrap();
        assert_eq!(cmp.groups[0].fit, pooled);
        assert_eq!(cmp.min_group_size, 6);
    }

    #[test]
    fn tiny_group_is_named() {
        let ds = grouped(&[(&[1.0, 2.0, 3.0, 4.0], 30), (&[5.0, 6.0], 70)]);
        assert_eq!(
            fit_by_group(&ds, Grouping::AgeBand, 0.1).unwrap_err(),
            Error::GroupTooSmall { group: "65-84".into(), size: 2, needed: 3 }
        );
    }

    #[test]
    fn tertiles_partition_dataset() {
        let mut recs = Vec::new();
        for i in 0..30 {
            let mut r = record(&format!("r{i}"), 1.0 + (i % 7) as f64);
            r.area_median_income = 10_000.0 + 1000.0 * i as f64;
            recs.push(r);
        }
        let ds = Dataset::new(recs, Provenance::Loaded, None).unwrap();
        let cmp = fit_by_group(&ds, Grouping::IncomeTertile, 0.1).unwrap();
        let sizes: Vec<usize> = cmp.groups.iter().map(|g| g.n).collect();
        assert_eq!(sizes, vec![10, 10, 10]);
    }

    #[test]
    fn two_sample_t_examples() {
        let mk =
            |lambda, se| GroupFit { label: "g".into(), n: 100, mean_time: 7.0, sd_time: 2.0, fit: fit_of(0.7, lambda, se), boundary: None };
        let cmp =
            GroupComparison { grouping: Grouping::Gender, epsilon: 0.1, groups: vec![mk(0.4, 0.02), mk(0.3, 0.02)], min_group_size: 100 };
        let t = test_group_differences(&cmp, TestTarget::Lambda).unwrap();
        assert_relative_eq!(t.statistic, 0.1 / 0.0008f64.sqrt(), epsilon = 1e-12);
        assert!((t.statistic - 3.536).abs() < 1e-3);

        let same = GroupComparison { groups: vec![mk(0.3, 0.02), mk(0.3, 0.02)], ..cmp.clone() };
        for target in [TestTarget::Lambda, TestTarget::MeanTime] {
            let t = test_group_differences(&same, target).unwrap();
            assert_eq!(t.statistic, 0.0);
            assert_relative_eq!(t.p_value, 1.0, epsilon = 1e-12);
        }

        let mut flat = same.clone();
        flat.groups[1].sd_time = 0.0;
        assert!(matches!(test_group_differences(&flat, TestTarget::MeanTime), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn anova_matches_direct_computation() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 4.0, 6.0, 5.0];
        let c = [7.0, 8.0, 6.5];
        let ds = grouped(&[(&a, 30), (&b, 50), (&c, 70)]);
        let cmp = fit_by_group(&ds, Grouping::AgeBand, 0.1).unwrap();
        let t = test_group_differences(&cmp, TestTarget::MeanTime).unwrap();
        // direct sums of squares over raw observations
        let all: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
        let gm = math::mean(&all);
        let ssb: f64 = [&a[..], &b[..], &c[..]].iter().map(|g| g.len() as f64 * (math::mean(g) - gm).powi(2)).sum();
        let ssw: f64 = [&a[..], &b[..], &c[..]]
            .iter()
            .map(|g| {
                let m = math::mean(g);
                g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            })
            .sum();
        let f = (ssb / 2.0) / (ssw / 7.0);
        assert_relative_eq!(t.statistic, f, epsilon = 1e-10);
        assert_eq!(t.kind, TestKind::AnovaF);
        assert_relative_eq!(t.p_value, math::f_sf(f, 2.0, 7.0), epsilon = 1e-14);

        let w = test_group_differences(&cmp, TestTarget::Lambda).unwrap();
        assert_eq!(w.kind, TestKind::WaldChi2);
        assert!((0.0..=1.0).contains(&w.p_value));
    }

    #[test]
    fn anova_p_uniform_under_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 500;
        let mut ps = Vec::with_capacity(reps);
        let ages = [30u32, 50, 70, 90];
        for _ in 0..reps {
            let mut recs = Vec::new();
            for (g, age) in ages.iter().enumerate() {
                for j in 0..25 {
                    let mut r = record(&format!("{g}-{j}"), (1.8 + 0.7 * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp());
                    r.patient_age = *age;
                    recs.push(r);
                }
            }
            let ds = Dataset::new(recs, Provenance::Loaded, None).unwrap();
            let cmp = fit_by_group(&ds, Grouping::AgeBand, 0.1).unwrap();
            ps.push(test_group_differences(&cmp, TestTarget::MeanTime).unwrap().p_value);
        }
        // Kolmogorov–Smirnov distance to Uniform(0, 1); 1.63/√n is the 1% critical value
        let s = math::sorted_copy(&ps);
        let d = s.iter().enumerate().map(|(i, p)| ((i + 1) as f64 / reps as f64 - p).max(p - i as f64 / reps as f64)).fold(0.0, f64::max);
        assert!(d < 1.63 / (reps as f64).sqrt(), "KS distance {d}");
    }

    #[test]
    fn grouping_labels_parse() {
        for g in Grouping::ALL {
            assert_eq!(g.as_str().parse::<Grouping>().unwrap(), *g);
        }
        assert!("nope".parse::<Grouping>().is_err());
    }

    proptest! {
        #[test]
        fn scale_equivariance(times in prop::collection::vec(0.05f64..40.0, 5..40), c in 0.2f64..5.0) {
            prop_assume!(times.iter().any(|t| (t - times[0]).abs() > 1e-3));
            let base = fit_exponential_decay(&EffectivenessSeries::from_times(&times).unwrap()).unwrap();
            prop_assume!(base.lambda > 1e-3 && base.tau0 > 0.2);
            // rescale time but keep τ values so only the regressor changes
            let scaled_t: Vec<f64> = times.iter().map(|t| t * c).collect();
            let tau: Vec<f64> = times.iter().map(|&t| crate::data::effectiveness(t)).collect();
            let scaled = fit_exponential_decay(&series(&scaled_t, &tau)).unwrap();
            prop_assert!((scaled.lambda * c - base.lambda).abs() <= 1e-9 * base.lambda.abs());
            let d0 = critical_boundary(&base, 0.1).unwrap().d_star;
            let d1 = critical_boundary(&scaled, 0.1).unwrap().d_star;
            prop_assert!((d1 - c * d0).abs() <= 1e-9 * d1.abs());
        }

        #[test]
        fn ols_matches_closed_form(times in prop::collection::vec(0.05f64..40.0, 3..30)) {
            prop_assume!(times.iter().any(|t| (t - times[0]).abs() > 1e-3));
            let s = EffectivenessSeries::from_times(&times).unwrap();
            let fit = fit_exponential_decay(&s).unwrap();
            let y: Vec<f64> = s.values().iter().map(|v| v.ln()).collect();
            let (a, b, _) = ols::simple(&times, &y).unwrap();
            prop_assert!((fit.tau0.ln() - a).abs() < 1e-12 * (1.0 + a.abs()) * 10.0);
            prop_assert!((fit.lambda + b).abs() < 1e-12 * (1.0 + b.abs()) * 10.0);
            prop_assert!((0.0..=1.0).contains(&fit.r_squared));
            prop_assert!(fit.se_lambda >= 0.0 && fit.se_tau0 >= 0.0);
        }

        #[test]
        fn boundary_monotone(tau0 in 0.3f64..1.0, lambda in 0.01f64..2.0, e1 in 0.01f64..0.29, de in 0.001f64..0.01, dl in 0.001f64..0.5) {
            let f = fit_of(tau0, lambda, 0.01);
            let a = critical_boundary(&f, e1).unwrap();
            let b = critical_boundary(&f, e1 + de).unwrap();
            prop_assert!(b.d_star < a.d_star);
            let c = critical_boundary(&fit_of(tau0, lambda + dl, 0.01), e1).unwrap();
            prop_assert!(c.d_star < a.d_star);
            prop_assert!(a.ci_lower < a.d_star && a.d_star < a.ci_upper);
            prop_assert!(a.d_star > 0.0);
        }
    }
}
