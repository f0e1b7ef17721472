//! Ordinary least squares with HC1 heteroskedasticity-robust covariance.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{Cholesky, SquareMatrix};
use crate::{Error, Result};

/// Regressor columns with names, stored column-major.
#[derive(Debug, Clone, Default)]
pub struct Design {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_intercept(n: usize) -> Self {
        let mut d = Self::new();
        d.push("constant", alloc::vec![1.0; n]);
        d
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> &mut Self {
        if let Some(first) = self.columns.first() {
            assert_eq!(first.len(), column.len(), "design columns must have equal length");
        }
        self.names.push(name.into());
        self.columns.push(column);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    fn row_dot(&self, i: usize, beta: &[f64]) -> f64 {
        self.columns.iter().zip(beta).map(|(c, b)| c[i] * b).sum()
    }
}

/// Fitted least-squares regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// HC1 covariance, row-major `k × k`.
    pub covariance: Vec<f64>,
    /// `(XᵀX)⁻¹`, row-major, kept for classical standard errors.
    pub xtx_inverse: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub ssr: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index(name).map(|j| self.coefficients[j])
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// HC1 robust standard errors.
    pub fn robust_se(&self) -> Vec<f64> {
        let k = self.k();
        (0..k).map(|j| self.covariance[j * k + j].max(0.0).sqrt()).collect()
    }

    /// Homoskedastic standard errors `sqrt(s² (XᵀX)⁻¹_jj)` with `s² = SSR / (n - k)`.
    pub fn classical_se(&self) -> Vec<f64> {
        let k = self.k();
        let s2 = self.ssr / (self.n - k) as f64;
        (0..k).map(|j| (s2 * self.xtx_inverse[j * k + j]).max(0.0).sqrt()).collect()
    }

    pub fn fitted(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.residuals).map(|(y, e)| y - e).collect()
    }
}

/// Least squares of `y` on `design` with HC1 covariance
/// `n/(n-k) · (XᵀX)⁻¹ (Σ eᵢ² xᵢxᵢᵀ) (XᵀX)⁻¹`.
pub fn fit(design: &Design, y: &[f64]) -> Result<OlsFit> {
    let n = design.rows();
    let k = design.cols();
    assert_eq!(n, y.len(), "outcome length must match design rows");
    if n <= k {
        return Err(Error::InsufficientData { needed: k + 1, got: n });
    }

    let mut xtx = SquareMatrix::zeros(k);
    for a in 0..k {
        for b in a..k {
            let v: f64 = design.column(a).iter().zip(design.column(b)).map(|(p, q)| p * q).sum();
            xtx.set(a, b, v);
            xtx.set(b, a, v);
        }
    }
    let chol = Cholesky::new(&xtx).map_err(|j| Error::Singular { column: design.names()[j].clone() })?;

    let xty: Vec<f64> = (0..k).map(|a| design.column(a).iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    let mut beta = chol.solve(&xty);

    // one step of iterative refinement
    let resid: Vec<f64> = (0..n).map(|i| y[i] - design.row_dot(i, &beta)).collect();
    let xtr: Vec<f64> = (0..k).map(|a| design.column(a).iter().zip(&resid).map(|(p, q)| p * q).sum()).collect();
    let delta = chol.solve(&xtr);
    beta.iter_mut().zip(&delta).for_each(|(b, d)| *b += d);

    let residuals: Vec<f64> = (0..n).map(|i| y[i] - design.row_dot(i, &beta)).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let ybar = crate::math::mean(y);
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r_squared = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 1.0 };

    let inv = chol.inverse();
    let mut meat = SquareMatrix::zeros(k);
    for i in 0..n {
        let e2 = residuals[i] * residuals[i];
        if e2 == 0.0 {
            continue;
        }
        for a in 0..k {
            let xa = design.column(a)[i] * e2;
            if xa == 0.0 {
                continue;
            }
            for b in a..k {
                meat.add(a, b, xa * design.column(b)[i]);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            let v = meat.get(b, a);
            meat.set(a, b, v);
        }
    }
    let mut cov = inv.matmul(&meat).matmul(&inv);
    cov.scale(n as f64 / (n - k) as f64);
    for a in 0..k {
        for b in (a + 1)..k {
            let v = 0.5 * (cov.get(a, b) + cov.get(b, a));
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }

    Ok(OlsFit {
        names: design.names().iter().map(ToString::to_string).collect(),
        coefficients: beta,
        covariance: cov.as_slice().to_vec(),
        xtx_inverse: inv.as_slice().to_vec(),
        residuals,
        r_squared,
        ssr,
        n,
    })
}

/// Simple regression `y = a + b x` fitted in closed form; returns `(a, b, ssr)`.
pub(crate) fn simple(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = crate::math::mean(x);
    let my = crate::math::mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    Some((a, b, ssr))
}
