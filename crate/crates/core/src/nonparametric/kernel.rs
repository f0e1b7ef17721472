use alloc::vec::Vec;

use super::{check_grid, sorted_pairs, CurveEstimate, KernelConfig, Method};
use crate::data::EffectivenessSeries;
use crate::{Error, Result};

/// Determinant ratio below which the local linear design counts as rank-deficient.
const RANK_TOL: f64 = 1e-10;

fn require(config: &KernelConfig, method: Method, series: &EffectivenessSeries, grid: &[f64]) -> Result<()> {
    if config.method != method {
        return Err(Error::invalid("method", "configuration names a different estimator"));
    }
    config.validate()?;
    check_grid(grid)?;
    if series.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Kernel moments `Σw, Σw·d, Σw·d², Σw·τ, Σw·d·τ` with `d = t − t₀`.
fn moments(t: &[f64], tau: &[f64], t0: f64, config: &KernelConfig) -> [f64; 5] {
    let mut m = [0.0; 5];
    for (ti, yi) in t.iter().zip(tau) {
        let d = ti - t0;
        let w = config.kernel.weight(d / config.bandwidth);
        m[0] += w;
        m[1] += w * d;
        m[2] += w * d * d;
        m[3] += w * yi;
        m[4] += w * d * yi;
    }
    m
}

fn nw_value(m: &[f64; 5]) -> Option<f64> {
    (m[0] > 0.0 && m[0].is_finite()).then(|| m[3] / m[0])
}

/// Nadaraya–Watson estimate `Σ K_h(tᵢ − t₀) τᵢ / Σ K_h(tᵢ − t₀)`.
pub fn kernel_regress(series: &EffectivenessSeries, config: &KernelConfig, grid: &[f64]) -> Result<CurveEstimate> {
    require(config, Method::NadarayaWatson, series, grid)?;
    let (t, tau) = sorted_pairs(series);
    let values = grid.iter().map(|&g| nw_value(&moments(&t, &tau, g, config))).collect();
    Ok(CurveEstimate { grid: grid.to_vec(), values, config: *config, fallback_points: Vec::new(), selected_penalty: None })
}

/// Intercept of the kernel-weighted line through the data at each grid point.
pub fn local_linear_regress(series: &EffectivenessSeries, config: &KernelConfig, grid: &[f64]) -> Result<CurveEstimate> {
    require(config, Method::LocalLinear, series, grid)?;
    let (t, tau) = sorted_pairs(series);
    let mut fallback_points = Vec::new();
    let values = grid
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let m = moments(&t, &tau, g, config);
            let det = m[0] * m[2] - m[1] * m[1];
            if m[0] > 0.0 && det > RANK_TOL * m[0] * m[2] {
                Some((m[2] * m[3] - m[1] * m[4]) / det)
            } else {
                fallback_points.push(i);
                nw_value(&m)
            }
        })
        .collect();
    Ok(CurveEstimate { grid: grid.to_vec(), values, config: *config, fallback_points, selected_penalty: None })
}
