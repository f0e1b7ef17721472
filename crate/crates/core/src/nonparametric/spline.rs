//! Natural cubic smoothing spline in Reinsch form with GCV penalty selection.
//!
//! With knots `x₀ < … < x_{m−1}`, tie counts `w` and tie means `ȳ`, the fitted
//! values are `g = ȳ − α W⁻¹ Q γ` where `(R + α QᵀW⁻¹Q) γ = Qᵀ ȳ`. The
//! pentadiagonal system is factored as `LDLᵀ`; the band of its inverse
//! (Hutchinson–de Hoog) gives the hat-matrix trace for the GCV score.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_grid, sorted_pairs, CurveEstimate, KernelConfig, Method};
use crate::data::EffectivenessSeries;
use crate::math;
use crate::{Error, Result};

const MIN_KNOTS: usize = 4;
const GRID_LO: f64 = -6.0;
const GRID_HI: f64 = 6.0;
const GRID_STEPS: usize = 61;

/// Symmetric pentadiagonal matrix stored by diagonals.
#[derive(Debug, Clone)]
struct Band {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Band {
    fn zeros(n: usize) -> Self {
        Self { d0: vec![0.0; n], d1: vec![0.0; n], d2: vec![0.0; n] }
    }

    fn combine(&self, alpha: f64, other: &Band) -> Band {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + alpha * y).collect();
        Band { d0: f(&self.d0, &other.d0), d1: f(&self.d1, &other.d1), d2: f(&self.d2, &other.d2) }
    }
}

/// `LDLᵀ` factor of a symmetric positive definite pentadiagonal matrix.
struct BandLdl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl BandLdl {
    fn new(a: &Band) -> Option<Self> {
        let n = a.d0.len();
        let (mut d, mut l1, mut l2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let mut dk = a.d0[k];
            if k >= 1 {
                dk -= l1[k - 1] * l1[k - 1] * d[k - 1];
            }
            if k >= 2 {
                dk -= l2[k - 2] * l2[k - 2] * d[k - 2];
            }
            if !(dk > 0.0) || !dk.is_finite() {
                return None;
            }
            d[k] = dk;
            if k + 1 < n {
                let mut v = a.d1[k];
                if k >= 1 {
                    v -= l1[k - 1] * l2[k - 1] * d[k - 1];
                }
                l1[k] = v / dk;
            }
            if k + 2 < n {
                l2[k] = a.d2[k] / dk;
            }
        }
        Some(Self { d, l1, l2 })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut z = b.to_vec();
        for k in 0..n {
            if k >= 1 {
                z[k] -= self.l1[k - 1] * z[k - 1];
            }
            if k >= 2 {
                z[k] -= self.l2[k - 2] * z[k - 2];
            }
        }
        for k in 0..n {
            z[k] /= self.d[k];
        }
        for k in (0..n).rev() {
            if k + 1 < n {
                z[k] -= self.l1[k] * z[k + 1];
            }
            if k + 2 < n {
                z[k] -= self.l2[k] * z[k + 2];
            }
        }
        z
    }

    /// Central band of the inverse.
    fn inverse_band(&self) -> Band {
        let n = self.d.len();
        let mut s = Band::zeros(n);
        for k in (0..n).rev() {
            let s1_next = if k + 1 < n { s.d1[k + 1] } else { 0.0 };
            let s0_next = if k + 1 < n { s.d0[k + 1] } else { 0.0 };
            let s0_next2 = if k + 2 < n { s.d0[k + 2] } else { 0.0 };
            s.d2[k] = if k + 2 < n { -self.l1[k] * s1_next - self.l2[k] * s0_next2 } else { 0.0 };
            s.d1[k] = if k + 1 < n { -self.l1[k] * s0_next - self.l2[k] * s1_next } else { 0.0 };
            s.d0[k] = 1.0 / self.d[k] - self.l1[k] * s.d1[k] - self.l2[k] * s.d2[k];
        }
        s
    }
}

fn band_trace_product(a: &Band, b: &Band) -> f64 {
    let mut t = 0.0;
    for k in 0..a.d0.len() {
        t += a.d0[k] * b.d0[k] + 2.0 * a.d1[k] * b.d1[k] + 2.0 * a.d2[k] * b.d2[k];
    }
    t
}

/// Knot-level data and the fixed matrices of the penalised problem.
struct Problem {
    x: Vec<f64>,
    w: Vec<f64>,
    y: Vec<f64>,
    h: Vec<f64>,
    r: Band,
    /// `QᵀW⁻¹Q`.
    b: Band,
    qty: Vec<f64>,
    n_obs: f64,
    within_ss: f64,
}

impl Problem {
    fn new(t: &[f64], tau: &[f64]) -> Result<Self> {
        let (mut x, mut w, mut y) = (Vec::new(), Vec::new(), Vec::new());
        let mut within_ss = 0.0;
        let mut i = 0;
        while i < t.len() {
            let mut j = i;
            while j < t.len() && t[j] == t[i] {
                j += 1;
            }
            let group = &tau[i..j];
            let m = math::mean(group);
            within_ss += group.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            x.push(t[i]);
            w.push((j - i) as f64);
            y.push(m);
            i = j;
        }
        let m = x.len();
        if m < MIN_KNOTS {
            return Err(Error::InsufficientData { needed: MIN_KNOTS, got: m });
        }
        let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
        let p = m - 2;
        let mut r = Band::zeros(p);
        for k in 0..p {
            r.d0[k] = (h[k] + h[k + 1]) / 3.0;
            if k + 1 < p {
                r.d1[k] = h[k + 1] / 6.0;
            }
        }
        // column k of Q has entries at rows k, k+1, k+2
        let qcol = |k: usize| [1.0 / h[k], -1.0 / h[k] - 1.0 / h[k + 1], 1.0 / h[k + 1]];
        let mut b = Band::zeros(p);
        for k in 0..p {
            let ck = qcol(k);
            b.d0[k] = (0..3).map(|s| ck[s] * ck[s] / w[k + s]).sum();
            if k + 1 < p {
                let cn = qcol(k + 1);
                b.d1[k] = ck[1] * cn[0] / w[k + 1] + ck[2] * cn[1] / w[k + 2];
            }
            if k + 2 < p {
                let cn = qcol(k + 2);
                b.d2[k] = ck[2] * cn[0] / w[k + 2];
            }
        }
        let qty = (0..p).map(|k| (y[k + 2] - y[k + 1]) / h[k + 1] - (y[k + 1] - y[k]) / h[k]).collect();
        Ok(Self { x, w, y, h, r, b, qty, n_obs: t.len() as f64, within_ss })
    }

    /// Penalty scale at which the roughness and data terms are comparable.
    fn scale(&self) -> f64 {
        let tr_b: f64 = self.b.d0.iter().sum();
        let tr_r: f64 = self.r.d0.iter().sum();
        tr_r / tr_b
    }

    fn fit(&self, alpha: f64) -> Option<SplineFit> {
        let m = self.x.len();
        let system = self.r.combine(alpha, &self.b);
        let ldl = BandLdl::new(&system)?;
        let gamma_inner = ldl.solve(&self.qty);
        let mut qg = vec![0.0; m];
        for (k, g) in gamma_inner.iter().enumerate() {
            qg[k] += g / self.h[k];
            qg[k + 1] += g * (-1.0 / self.h[k] - 1.0 / self.h[k + 1]);
            qg[k + 2] += g / self.h[k + 1];
        }
        let fitted: Vec<f64> = (0..m).map(|i| self.y[i] - alpha * qg[i] / self.w[i]).collect();
        let trace = m as f64 - alpha * band_trace_product(&ldl.inverse_band(), &self.b);
        let rss = self.within_ss + (0..m).map(|i| self.w[i] * (self.y[i] - fitted[i]).powi(2)).sum::<f64>();
        let denom = self.n_obs - trace;
        let gcv = if denom > 1e-9 * self.n_obs { self.n_obs * rss / (denom * denom) } else { f64::INFINITY };
        let mut gamma = vec![0.0; m];
        gamma[1..m - 1].copy_from_slice(&gamma_inner);
        Some(SplineFit { knots: self.x.clone(), fitted, gamma, penalty: alpha, trace, rss, gcv })
    }
}

/// Fitted spline: values and second derivatives at the knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit {
    pub knots: Vec<f64>,
    pub fitted: Vec<f64>,
    pub gamma: Vec<f64>,
    pub penalty: f64,
    /// Trace of the hat matrix (effective degrees of freedom).
    pub trace: f64,
    pub rss: f64,
    pub gcv: f64,
}

impl SplineFit {
    /// Fits the spline to `(t, τ)` pairs; `penalty = None` minimises GCV.
    pub fn fit(t: &[f64], tau: &[f64], penalty: Option<f64>) -> Result<Self> {
        let problem = Problem::new(t, tau)?;
        let unstable = || Error::Unidentified("spline system is not positive definite".into());
        if let Some(alpha) = penalty {
            return problem.fit(alpha).ok_or_else(unstable);
        }
        let scale = problem.scale();
        let score = |log_r: f64| problem.fit(scale * 10f64.powf(log_r)).map_or(f64::INFINITY, |f| f.gcv);
        let grid = math::linspace(GRID_LO, GRID_HI, GRID_STEPS);
        let scores: Vec<f64> = grid.iter().map(|&g| score(g)).collect();
        let best = (0..grid.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (refined, refined_score) = math::golden_section_min(score, lo, hi, 1e-6);
        let log_r = if refined_score <= scores[best] { refined } else { grid[best] };
        problem.fit(scale * 10f64.powf(log_r)).ok_or_else(unstable)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let k = &self.knots;
        let m = k.len();
        let (g, c) = (&self.fitted, &self.gamma);
        if x <= k[0] {
            let h = k[1] - k[0];
            let slope = (g[1] - g[0]) / h - h * c[1] / 6.0;
            return g[0] + slope * (x - k[0]);
        }
        if x >= k[m - 1] {
            let h = k[m - 1] - k[m - 2];
            let slope = (g[m - 1] - g[m - 2]) / h + h * c[m - 2] / 6.0;
            return g[m - 1] + slope * (x - k[m - 1]);
        }
        let i = k.partition_point(|v| *v <= x).saturating_sub(1).min(m - 2);
        let h = k[i + 1] - k[i];
        let (a, b) = (x - k[i], k[i + 1] - x);
        (a * g[i + 1] + b * g[i]) / h - a * b / 6.0 * ((1.0 + a / h) * c[i + 1] + (1.0 + b / h) * c[i])
    }
}

/// Natural cubic smoothing spline evaluated on `grid`.
pub fn spline_regress(series: &EffectivenessSeries, config: &KernelConfig, grid: &[f64]) -> Result<CurveEstimate> {
    if config.method != Method::CubicSpline {
        return Err(Error::invalid("method", "configuration names a different estimator"));
    }
    config.validate()?;
    check_grid(grid)?;
    let (t, tau) = sorted_pairs(series);
    let fit = SplineFit::fit(&t, &tau, config.spline_penalty)?;
    Ok(CurveEstimate {
        grid: grid.to_vec(),
        values: grid.iter().map(|&x| Some(fit.evaluate(x))).collect(),
        config: *config,
        fallback_points: Vec::new(),
        selected_penalty: Some(fit.penalty),
    })
}
