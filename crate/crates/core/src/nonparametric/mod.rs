//! Kernel, local-polynomial and smoothing-spline estimates of the decay curve,
//! and in-sample fit comparison against the parametric model.

mod kernel;
mod loess;
mod spline;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::data::EffectivenessSeries;
use crate::math;
use crate::parametric::DecayFit;
use crate::{Error, Result};

pub use kernel::{kernel_regress, local_linear_regress};
pub use loess::loess_regress;
pub use spline::{spline_regress, SplineFit};

/// Points in the default evaluation grid.
pub const DEFAULT_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
}

impl Kernel {
    /// Unnormalised kernel weight at standardised distance `u`.
    pub fn weight(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NadarayaWatson,
    LocalLinear,
    LoessDeg2,
    CubicSpline,
}

impl Method {
    pub const ALL: &'static [Method] = &[Method::NadarayaWatson, Method::LocalLinear, Method::LoessDeg2, Method::CubicSpline];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NadarayaWatson => "nadaraya_watson",
            Method::LocalLinear => "local_linear",
            Method::LoessDeg2 => "loess_deg2",
            Method::CubicSpline => "cubic_spline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Kernel bandwidth in minutes.
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub method: Method,
    /// Neighbourhood fraction for LOESS.
    pub loess_span: f64,
    /// Fixed spline penalty; `None` selects it by generalised cross-validation.
    pub spline_penalty: Option<f64>,
}

impl KernelConfig {
    pub fn new(method: Method, bandwidth: f64) -> Self {
        Self { bandwidth, kernel: Kernel::Gaussian, method, loess_span: 0.30, spline_penalty: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::invalid("bandwidth", format!("{} is not a positive finite width", self.bandwidth)));
        }
        if !(self.loess_span > 0.0 && self.loess_span <= 1.0) {
            return Err(Error::invalid("loess_span", format!("{} outside (0, 1]", self.loess_span)));
        }
        if let Some(p) = self.spline_penalty {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::invalid("spline_penalty", format!("{p} is not a non-negative penalty")));
            }
        }
        Ok(())
    }
}

/// Curve values on a grid; `None` marks points with no effective weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub config: KernelConfig,
    /// Grid indices where a lower-order fit replaced a rank-deficient local design.
    pub fallback_points: Vec<usize>,
    /// Penalty used by the spline (selected or fixed).
    pub selected_penalty: Option<f64>,
}

impl CurveEstimate {
    /// Value at `t`: exact on grid points, linear in between, constant beyond the ends.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let g = &self.grid;
        if g.is_empty() {
            return None;
        }
        if t <= g[0] {
            return self.values[0];
        }
        if t >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        match g.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => self.values[i],
            Err(i) => {
                let (a, b) = (self.values[i - 1]?, self.values[i]?);
                let w = (t - g[i - 1]) / (g[i] - g[i - 1]);
                Some(a + w * (b - a))
            }
        }
    }
}

/// Silverman's rule `h = 1.06 · sd · n^(−1/5)`.
pub fn silverman_bandwidth(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: times.len() });
    }
    let sd = math::sample_sd(times).unwrap();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("times for the bandwidth rule".into()));
    }
    Ok(1.06 * sd * (times.len() as f64).powf(-0.2))
}

/// `points` equally spaced times spanning the observed range.
pub fn default_grid(series: &EffectivenessSeries, points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = math::min_max(series.times()).ok_or(Error::EmptyDataset)?;
    Ok(math::linspace(lo, hi, points))
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "no evaluation points"));
    }
    if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid", "points must be finite and strictly increasing"));
    }
    Ok(())
}

/// Observations sorted by time then value, so results do not depend on input order.
pub(crate) fn sorted_pairs(series: &EffectivenessSeries) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = series.times().iter().copied().zip(series.values().iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs.into_iter().unzip()
}

/// Dispatches on `config.method`.
pub fn estimate_curve(series: &EffectivenessSeries, config: &KernelConfig, grid: &[f64]) -> Result<CurveEstimate> {
    match config.method {
        Method::NadarayaWatson => kernel_regress(series, config, grid),
        Method::LocalLinear => local_linear_regress(series, config, grid),
        Method::LoessDeg2 => loess_regress(series, config, grid),
        Method::CubicSpline => spline_regress(series, config, grid),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFit {
    pub method: String,
    pub mse: f64,
    pub mae_percent: f64,
    /// Observations with a defined prediction.
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitComparison {
    pub methods: Vec<MethodFit>,
    /// Method names by increasing MSE.
    pub ranking: Vec<String>,
}

impl FitComparison {
    pub fn get(&self, method: &str) -> Option<&MethodFit> {
        self.methods.iter().find(|m| m.method == method)
    }
}

fn score(name: &str, tau: &[f64], predicted: impl Iterator<Item = Option<f64>>) -> MethodFit {
    let mut sq = 0.0;
    let mut rel = 0.0;
    let mut count = 0usize;
    for (y, p) in tau.iter().zip(predicted) {
        if let Some(p) = p {
            sq += (y - p) * (y - p);
            rel += (y - p).abs() / y;
            count += 1;
        }
    }
    let (mse, mae_percent) = if count == 0 { (f64::NAN, f64::NAN) } else { (sq / count as f64, 100.0 * rel / count as f64) };
    MethodFit { method: name.to_string(), mse, mae_percent, evaluated: count }
}

/// In-sample MSE and percent MAE of the parametric fit and each curve.
pub fn compare_fit_quality(series: &EffectivenessSeries, parametric: &DecayFit, curves: &[CurveEstimate]) -> FitComparison {
    let tau = series.values();
    let mut methods = Vec::with_capacity(curves.len() + 1);
    methods.push(score("parametric", tau, series.times().iter().map(|t| Some(parametric.tau0 * (-parametric.lambda * t).exp()))));
    for c in curves {
        methods.push(score(c.config.method.as_str(), tau, series.times().iter().map(|&t| c.value_at(t))));
    }
    let mut order: Vec<&MethodFit> = methods.iter().collect();
    order.sort_by(|a, b| a.mse.total_cmp(&b.mse).then_with(|| a.method.cmp(&b.method)));
    let ranking = order.into_iter().map(|m| m.method.clone()).collect();
    FitComparison { methods, ranking }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametric::fit_exponential_decay;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn silverman_examples() {
        // 32 points with unit sample sd
        let mut xs: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let sd = math::sample_sd(&xs).unwrap();
        xs.iter_mut().for_each(|x| *x /= sd);
        assert_relative_eq!(silverman_bandwidth(&xs).unwrap(), 0.53, epsilon = 1e-12);
        assert!(silverman_bandwidth(&[1.0]).is_err());
        assert!(matches!(silverman_bandwidth(&[2.0, 2.0, 2.0]), Err(Error::ZeroVariance(_))));
        assert_relative_eq!(1.06 * 6.96 * 10000f64.powf(-0.2), 1.169, epsilon = 5e-4);
    }

    #[test]
    fn config_validation() {
        assert!(KernelConfig::new(Method::NadarayaWatson, 0.0).validate().is_err());
        let mut c = KernelConfig::new(Method::LoessDeg2, 1.0);
        c.loess_span = 1.5;
        assert!(c.validate().is_err());
        c.loess_span = 1.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn value_at_interpolates() {
        let c = CurveEstimate {
            grid: vec![0.0, 1.0, 2.0],
            values: vec![Some(1.0), Some(3.0), None],
            config: KernelConfig::new(Method::NadarayaWatson, 1.0),
            fallback_points: vec![],
            selected_penalty: None,
        };
        assert_eq!(c.value_at(0.5), Some(2.0));
        assert_eq!(c.value_at(1.0), Some(3.0));
        assert_eq!(c.value_at(1.5), None);
        assert_eq!(c.value_at(-4.0), Some(1.0));
    }

    #[test]
    fn parametric_against_itself_and_interpolating_spline() {
        let times = vec![0.5, 1.0, 2.0, 3.5, 5.0, 8.0, 9.0];
        let s = EffectivenessSeries::from_times(&times).unwrap();
        let fit = fit_exponential_decay(&s).unwrap();
        let a = compare_fit_quality(&s, &fit, &[]);
        let b = compare_fit_quality(&s, &fit, &[]);
        assert_eq!(a.methods[0].mse, b.methods[0].mse);

        let mut cfg = KernelConfig::new(Method::CubicSpline, 1.0);
        cfg.spline_penalty = Some(0.0);
        let curve = spline_regress(&s, &cfg, &times).unwrap();
        let cmp = compare_fit_quality(&s, &fit, &[curve]);
        assert!(cmp.get("cubic_spline").unwrap().mse < 1e-24);
        assert_eq!(cmp.ranking[0], "cubic_spline");
        assert!(cmp.methods.iter().all(|m| m.mse >= 0.0 && m.mae_percent >= 0.0));
    }
}
