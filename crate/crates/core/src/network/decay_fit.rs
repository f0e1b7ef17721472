//! Distance regressions for the effective decay rate.
//!
//! Excess response time is modelled as `ΔRT = α + β₀ (e^{κ_eff d} − 1)`; any
//! separate linear-in-distance term is absorbed into `α` and `β₀`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{math, ols, Error, Result};

pub const KAPPA_GRID_MIN: f64 = 1e-4;
pub const KAPPA_GRID_MAX: f64 = 2.0;
pub const KAPPA_GRID_POINTS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaFit {
    /// `None` when the least-squares profile is flat in `κ_eff`.
    pub kappa_eff: Option<f64>,
    pub beta0: f64,
    pub intercept: f64,
    pub sse: f64,
    pub r_squared: f64,
    pub n: usize,
}

fn check_inputs(distances: &[f64], delta: &[f64]) -> Result<()> {
    if distances.len() != delta.len() {
        return Err(Error::invalid("delta_response", format!("{} responses for {} distances", delta.len(), distances.len())));
    }
    if distances.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: distances.len() });
    }
    if let Some(bad) = distances.iter().chain(delta).find(|x| !x.is_finite()) {
        return Err(Error::invalid("distances", format!("non-finite value {bad}")));
    }
    if distances.iter().any(|d| *d < 0.0) {
        return Err(Error::invalid("distances", "distances must be non-negative"));
    }
    let (lo, hi) = math::min_max(distances).unwrap();
    if lo == hi {
        return Err(Error::Unidentified("kappa_eff: every distance is equal".into()));
    }
    Ok(())
}

fn total_ss(y: &[f64]) -> f64 {
    let m = math::mean(y);
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

fn r_squared(sse: f64, sst: f64) -> f64 {
    if sst > 0.0 {
        1.0 - sse / sst
    } else {
        0.0
    }
}

/// `(intercept, β₀, sse)` at a fixed `κ_eff`.
fn inner(distances: &[f64], delta: &[f64], kappa: f64) -> Option<(f64, f64, f64)> {
    let x: Vec<f64> = distances.iter().map(|d| (kappa * d).exp_m1()).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    ols::simple(&x, delta).filter(|(_, _, s)| s.is_finite())
}

fn profile(distances: &[f64], delta: &[f64], kappa: f64) -> f64 {
    inner(distances, delta, kappa).map_or(f64::INFINITY, |(_, _, s)| s)
}

/// Grid search over log-spaced `κ_eff` followed by golden-section refinement.
pub fn fit_kappa_eff(distances: &[f64], delta_response: &[f64]) -> Result<KappaFit> {
    check_inputs(distances, delta_response)?;
    let n = distances.len();
    let sst = total_ss(delta_response);
    let step = (KAPPA_GRID_MAX / KAPPA_GRID_MIN).ln() / (KAPPA_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KAPPA_GRID_POINTS).map(|i| KAPPA_GRID_MIN * (step * i as f64).exp()).collect();
    let sse: Vec<f64> = grid.iter().map(|k| profile(distances, delta_response, *k)).collect();
    let (best, best_sse) = sse.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    if !best_sse.is_finite() {
        return Err(Error::Unidentified("kappa_eff: no grid value gives a finite fit".into()));
    }
    let worst = sse.iter().copied().filter(|s| s.is_finite()).fold(best_sse, f64::max);
    if worst - best_sse <= 1e-12 * (1.0 + worst.abs()) {
        let (intercept, beta0, sse) = inner(distances, delta_response, grid[best]).unwrap();
        return Ok(KappaFit { kappa_eff: None, beta0, intercept, sse, r_squared: r_squared(sse, sst), n });
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(KAPPA_GRID_POINTS - 1)];
    let (refined, refined_sse) = math::golden_section_min(|k| profile(distances, delta_response, k), lo, hi, 1e-10);
    let kappa = if refined_sse <= best_sse { refined } else { grid[best] };
    let (intercept, beta0, sse) = inner(distances, delta_response, kappa).unwrap();
    Ok(KappaFit { kappa_eff: Some(kappa), beta0, intercept, sse, r_squared: r_squared(sse, sst), n })
}

/// `n` evenly spaced distances on `[0, max_distance]` with
/// `ΔRT = β₀ (e^{κ_eff d} − 1) + N(0, noise_sd²)`.
pub fn synthetic_distance_response(
    n: usize,
    max_distance: f64,
    kappa_eff: f64,
    beta0: f64,
    noise_sd: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = if n > 1 { max_distance / (n - 1) as f64 } else { 0.0 };
    let d: Vec<f64> = (0..n).map(|i| step * i as f64).collect();
    let y = d.iter().map(|x| beta0 * (kappa_eff * x).exp_m1() + noise_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    (d, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub r_squared: f64,
    pub aic: f64,
    pub bic: f64,
    pub parameters: usize,
    pub sse: f64,
}

impl ModelScore {
    fn gaussian(sse: f64, sst: f64, n: usize, parameters: usize) -> Self {
        let nf = n as f64;
        let base = nf * (sse / nf).max(f64::MIN_POSITIVE).ln();
        let k = parameters as f64;
        Self { r_squared: r_squared(sse, sst), aic: base + 2.0 * k, bic: base + k * nf.ln(), parameters, sse }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormComparison {
    pub linear_intercept: f64,
    pub linear_slope: f64,
    pub linear: ModelScore,
    pub exponential: ModelScore,
    pub kappa: KappaFit,
    /// `AIC_linear − AIC_exponential`; positive favours the exponential form.
    pub delta_aic: f64,
    pub delta_r_squared: f64,
    pub n: usize,
}

/// Linear against exponential distance response, scored by Gaussian AIC and BIC.
pub fn functional_form_test(distances: &[f64], delta_response: &[f64]) -> Result<FormComparison> {
    let kappa = fit_kappa_eff(distances, delta_response)?;
    let n = distances.len();
    let sst = total_ss(delta_response);
    let (a, b, sse_lin) = ols::simple(distances, delta_response).ok_or(Error::Singular { column: "distance".into() })?;
    let linear = ModelScore::gaussian(sse_lin, sst, n, 2);
    let exponential = ModelScore::gaussian(kappa.sse, sst, n, 3);
    Ok(FormComparison {
        linear_intercept: a,
        linear_slope: b,
        linear,
        exponential,
        kappa,
        delta_aic: linear.aic - exponential.aic,
        delta_r_squared: exponential.r_squared - linear.r_squared,
        n,
    })
}

/// Diffusion by period, with `D̂` normalised so free-flow speed maps to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeVaryingDiffusion {
    pub periods: Vec<String>,
    /// Miles per hour.
    pub avg_speed: Vec<f64>,
    pub d_hat: Vec<f64>,
    /// Speed assigned `D̂ = 1`.
    pub free_flow_speed: f64,
}

/// Period, speed (mph), `D̂`, estimated `κ_eff` for the observed city-wide periods.
pub const REFERENCE_PERIODS: [(&str, f64, f64, f64); 11] = [
    ("Midnight-6 AM", 32.4, 1.00, 0.124),
    ("6-9 AM", 18.7, 0.58, 0.182),
    ("9 AM-4 PM", 24.3, 0.75, 0.151),
    ("4-7 PM", 16.8, 0.52, 0.197),
    ("7 PM-Midnight", 27.9, 0.86, 0.137),
    ("Weekday", 24.0, 0.74, 0.156),
    ("Weekend", 28.7, 0.89, 0.139),
    ("Holiday", 31.2, 0.96, 0.128),
    ("Clear", 26.8, 0.83, 0.145),
    ("Rain", 22.1, 0.68, 0.162),
    ("Snow", 15.3, 0.47, 0.207),
];

impl TimeVaryingDiffusion {
    /// `D̂ = speed / free_flow_speed`.
    pub fn from_speeds(periods: Vec<String>, avg_speed: Vec<f64>, free_flow_speed: f64) -> Result<Self> {
        if !(free_flow_speed > 0.0) {
            return Err(Error::invalid("free_flow_speed", format!("{free_flow_speed} is not positive")));
        }
        let d_hat = avg_speed.iter().map(|s| s / free_flow_speed).collect();
        Self::new(periods, avg_speed, d_hat, free_flow_speed)
    }

    pub fn new(periods: Vec<String>, avg_speed: Vec<f64>, d_hat: Vec<f64>, free_flow_speed: f64) -> Result<Self> {
        if periods.len() != avg_speed.len() || periods.len() != d_hat.len() {
            return Err(Error::invalid("periods", "labels, speeds and D_hat differ in length"));
        }
        if let Some(i) = d_hat.iter().position(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid("d_hat", format!("period `{}` has D_hat {}", periods[i], d_hat[i])));
        }
        Ok(Self { periods, avg_speed, d_hat, free_flow_speed })
    }

    /// The rounded published `D̂` column with its free-flow anchor.
    pub fn reference() -> Self {
        let periods = REFERENCE_PERIODS.iter().map(|r| r.0.into()).collect();
        let speeds = REFERENCE_PERIODS.iter().map(|r| r.1).collect();
        let d_hat = REFERENCE_PERIODS.iter().map(|r| r.2).collect();
        Self::new(periods, speeds, d_hat, REFERENCE_PERIODS[0].1).unwrap()
    }

    pub fn reference_kappa_eff() -> Vec<f64> {
        REFERENCE_PERIODS.iter().map(|r| r.3).collect()
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqrtLawResult {
    pub slope: f64,
    pub intercept: f64,
    pub se: f64,
    pub t_statistic: f64,
    /// Two-sided p-value for a slope of −1/2.
    pub p_vs_minus_half: f64,
    pub n: usize,
}

/// Log-log regression of `κ_eff` on `D̂` tested against the square-root law.
pub fn sqrt_law_test(tv: &TimeVaryingDiffusion, kappa_eff_by_period: &[f64]) -> Result<SqrtLawResult> {
    let n = tv.len();
    if kappa_eff_by_period.len() != n {
        return Err(Error::invalid("kappa_eff", format!("{} estimates for {n} periods", kappa_eff_by_period.len())));
    }
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if let Some(i) = kappa_eff_by_period.iter().position(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(Error::invalid("kappa_eff", format!("period `{}` has kappa_eff {}", tv.periods[i], kappa_eff_by_period[i])));
    }
    let x: Vec<f64> = tv.d_hat.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = kappa_eff_by_period.iter().map(|k| k.ln()).collect();
    let (intercept, slope, ssr) = ols::simple(&x, &y).ok_or_else(|| Error::Unidentified("slope: every D_hat is equal".into()))?;
    let mx = math::mean(&x);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let df = (n - 2) as f64;
    let se = if n > 2 { (ssr / df / sxx).sqrt() } else { 0.0 };
    let gap = slope + 0.5;
    let (t_statistic, p_vs_minus_half) = if se <= 1e-12 * (1.0 + slope.abs()) {
        if gap.abs() <= 1e-10 {
            (0.0, 1.0)
        } else {
            (gap.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = gap / se;
        (t, math::student_t_two_sided_p(t, df))
    };
    Ok(SqrtLawResult { slope, intercept, se, t_statistic, p_vs_minus_half, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exact(kappa: f64, beta: f64, d: &[f64]) -> Vec<f64> {
        d.iter().map(|x| beta * ((kappa * x).exp() - 1.0)).collect()
    }

    fn distances(n: usize, hi: f64) -> Vec<f64> {
        (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn recovers_noiseless_rate() {
        let d = distances(60, 12.0);
        let f = fit_kappa_eff(&d, &exact(0.156, 3.0, &d)).unwrap();
        assert_relative_eq!(f.kappa_eff.unwrap(), 0.156, epsilon = 1e-6);
        assert_relative_eq!(f.beta0, 3.0, epsilon = 1e-4);
        assert!(f.sse < 1e-8);
    }

    #[test]
    fn zero_response_unidentified() {
        let d = distances(10, 5.0);
        let f = fit_kappa_eff(&d, &[0.0; 10]).unwrap();
        assert_eq!((f.kappa_eff, f.beta0, f.sse), (None, 0.0, 0.0));
    }

    #[test]
    fn equal_distances_rejected() {
        assert!(matches!(fit_kappa_eff(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(Error::Unidentified(_))));
        assert!(matches!(fit_kappa_eff(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn noisy_recovery_over_seeds() {
        let d = distances(400, 10.0);
        let clean = exact(0.22, 2.0, &d);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = clean.iter().map(|v| v + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let k = fit_kappa_eff(&d, &y).unwrap().kappa_eff.unwrap();
            assert!((k / 0.22 - 1.0).abs() < 0.10, "seed {seed}: {k}");
        }
    }

    #[test]
    fn linear_data_prefers_linear() {
        let d = distances(200, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = d.iter().map(|x| 1.0 + 0.8 * x + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let c = functional_form_test(&d, &y).unwrap();
        assert!(c.exponential.aic > c.linear.aic, "{c:?}");
        assert!(c.delta_aic < 0.0);
        let exact_line: Vec<f64> = d.iter().map(|x| 1.0 + 0.8 * x).collect();
        let c = functional_form_test(&d, &exact_line).unwrap();
        assert!(c.linear.aic < c.exponential.aic);
    }

    #[test]
    fn exponential_data_prefers_exponential() {
        let d = distances(500, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = exact(0.156, 3.0, &d).into_iter().map(|v| v + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let c = functional_form_test(&d, &y).unwrap();
        assert!(c.delta_aic > 0.0 && c.delta_r_squared > 0.0, "{c:?}");
        assert!(c.exponential.bic < c.linear.bic);
    }

    #[test]
    fn constant_data_differs_by_penalty() {
        let d = distances(30, 4.0);
        let c = functional_form_test(&d, &vec![2.5; 30]).unwrap();
        assert_eq!(c.linear.r_squared, 0.0);
        assert_eq!(c.exponential.r_squared, 0.0);
        assert_relative_eq!(c.delta_aic, -2.0, epsilon = 1e-9);
    }

    #[test]
    fn constructed_square_root_law() {
        let d_hat = vec![0.3, 0.45, 0.5, 0.62, 0.7, 0.81, 0.9, 1.0, 1.2, 1.5];
        let tv = TimeVaryingDiffusion::new((0..10).map(|i| format!("p{i}")).collect(), vec![20.0; 10], d_hat.clone(), 32.0).unwrap();
        let k: Vec<f64> = d_hat.iter().map(|d| (0.024 / d).sqrt()).collect();
        let r = sqrt_law_test(&tv, &k).unwrap();
        assert_relative_eq!(r.slope, -0.5, epsilon = 1e-12);
        assert_eq!(r.p_vs_minus_half, 1.0);
    }

    #[test]
    fn unrelated_rates_reject() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200;
        let d_hat: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..1.5)).collect();
        let k: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.2)).collect();
        let tv = TimeVaryingDiffusion::new((0..n).map(|i| format!("p{i}")).collect(), vec![1.0; n], d_hat, 32.0).unwrap();
        let r = sqrt_law_test(&tv, &k).unwrap();
        assert!(r.slope.abs() < 0.1);
        assert!(r.p_vs_minus_half < 1e-6);
    }

    #[test]
    fn reference_periods_regression() {
        let tv = TimeVaryingDiffusion::reference();
        let r = sqrt_law_test(&tv, &TimeVaryingDiffusion::reference_kappa_eff()).unwrap();
        assert_relative_eq!(r.slope, -0.677, epsilon = 1e-3);
        assert_eq!(r.n, 11);
        let short = TimeVaryingDiffusion::new(vec!["a".into(), "b".into()], vec![1.0; 2], vec![0.5, 1.0], 1.0).unwrap();
        assert!(sqrt_law_test(&short, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn speeds_normalise_to_anchor() {
        let tv = TimeVaryingDiffusion::from_speeds(vec!["ff".into(), "peak".into()], vec![32.0, 16.0], 32.0).unwrap();
        assert_eq!(tv.d_hat, vec![1.0, 0.5]);
        assert!(TimeVaryingDiffusion::from_speeds(vec!["x".into()], vec![0.0], 32.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn distance_scaling(kappa in 0.05f64..0.5, c in 0.5f64..3.0) {
            let d = distances(40, 8.0);
            let y = exact(kappa, 2.0, &d);
            let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
            let a = fit_kappa_eff(&d, &y).unwrap().kappa_eff.unwrap();
            let b = fit_kappa_eff(&scaled, &y).unwrap().kappa_eff.unwrap();
            prop_assert!((b * c / a - 1.0).abs() < 1e-4, "{a} {b}");
        }
    }
}
