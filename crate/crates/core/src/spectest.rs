//! Residual-based functional-form test of the exponential decay model.
//!
//! `T_n = ∫ ĝ(t)² f̂(t) dt`, where `ĝ` is a Nadaraya–Watson smooth of the
//! log-scale residuals and `f̂` a Gaussian density estimate of the times,
//! both at the Silverman bandwidth. Its null distribution comes from a
//! residual bootstrap under the fitted model.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::EffectivenessSeries;
use crate::math;
use crate::nonparametric::{silverman_bandwidth, Kernel, DEFAULT_GRID_POINTS};
use crate::ols;
use crate::parametric::DecayFit;
use crate::{Error, Result};

pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub resamples: usize,
    /// Replicates with `T* ≥ T_n`.
    pub exceedances: usize,
    pub bandwidth: f64,
}

/// Kernel weights of every observation at every grid point.
struct Smoother {
    grid: Vec<f64>,
    weights: Vec<Vec<f64>>,
    row_sums: Vec<f64>,
    density: Vec<f64>,
}

impl Smoother {
    fn new(times: &[f64], bandwidth: f64) -> Self {
        let (lo, hi) = math::min_max(times).unwrap();
        let grid = math::linspace(lo, hi, DEFAULT_GRID_POINTS);
        let n = times.len() as f64;
        let norm = 1.0 / (n * bandwidth * (2.0 * core::f64::consts::PI).sqrt());
        let weights: Vec<Vec<f64>> =
            grid.iter().map(|g| times.iter().map(|t| Kernel::Gaussian.weight((t - g) / bandwidth)).collect()).collect();
        let row_sums: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
        let density = row_sums.iter().map(|s| s * norm).collect();
        Self { grid, weights, row_sums, density }
    }

    fn statistic(&self, residuals: &[f64]) -> f64 {
        let integrand: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.row_sums)
            .zip(&self.density)
            .map(|((w, s), f)| {
                let g = if *s > 0.0 { w.iter().zip(residuals).map(|(w, e)| w * e).sum::<f64>() / s } else { 0.0 };
                g * g * f
            })
            .collect();
        math::trapezoid(&self.grid, &integrand)
    }
}

/// Bootstrap test of the log-linear decay specification.
///
/// Replicate `b` draws from a ChaCha stream `b` keyed by `seed`, so results
/// do not depend on how replicates are scheduled.
pub fn residual_specification_test(series: &EffectivenessSeries, fit: &DecayFit, resamples: usize, seed: u64) -> Result<SpecTestResult> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::invalid("resamples", alloc::format!("{resamples} is below the minimum of {MIN_RESAMPLES}")));
    }
    if fit.residuals.len() != series.len() {
        return Err(Error::invalid("fit", "residual count differs from the series length"));
    }
    let mut pairs: Vec<(f64, f64)> = series.times().iter().copied().zip(fit.residuals.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (t, resid): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let bandwidth = silverman_bandwidth(&t)?;
    if resid.iter().all(|e| *e == 0.0) {
        return Ok(SpecTestResult { statistic: 0.0, p_value: 1.0, resamples, exceedances: resamples, bandwidth });
    }

    let smoother = Smoother::new(&t, bandwidth);
    let statistic = smoother.statistic(&resid);
    let intercept = fit.tau0.ln();
    let n = t.len();
    let mut y_star = vec![0.0; n];
    let mut e_star = vec![0.0; n];
    let mut exceedances = 0;
    for b in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        for i in 0..n {
            y_star[i] = intercept - fit.lambda * t[i] + resid[rng.random_range(0..n)];
        }
        let (a, slope, _) = ols::simple(&t, &y_star).ok_or_else(|| Error::Singular { column: "time".into() })?;
        for i in 0..n {
            e_star[i] = y_star[i] - a - slope * t[i];
        }
        if smoother.statistic(&e_star) >= statistic {
            exceedances += 1;
        }
    }
    let p_value = (1 + exceedances) as f64 / (resamples + 1) as f64;
    Ok(SpecTestResult { statistic, p_value, resamples, exceedances, bandwidth })
}
