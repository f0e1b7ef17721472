use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::graph::StreetNetwork;
use crate::{Error, Result};

/// Relative residual at which the conjugate-gradient solve stops.
const CG_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    /// Diffusion coefficient `D`.
    pub diffusion: f64,
    /// Per-minute decay `κ`.
    pub kappa: f64,
}

impl DiffusionParams {
    pub fn new(diffusion: f64, kappa: f64) -> Result<Self> {
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(Error::invalid("diffusion", format!("{diffusion} is not a non-negative coefficient")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::invalid("kappa", format!("{kappa} is not a non-negative rate")));
        }
        Ok(Self { diffusion, kappa })
    }

    /// Parameters with the given effective decay and `D`: `κ = κ_eff² D`.
    pub fn from_kappa_eff(kappa_eff: f64, diffusion: f64) -> Result<Self> {
        Self::new(diffusion, kappa_eff * kappa_eff * diffusion)
    }

    /// `κ_eff = √(κ / D)`; infinite when `D = 0`.
    pub fn kappa_eff(&self) -> f64 {
        (self.kappa / self.diffusion).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSpec {
    pub node: String,
    pub operational: bool,
    pub capacity: f64,
}

impl StationSpec {
    pub fn new(node: impl Into<String>, capacity: f64) -> Self {
        Self { node: node.into(), operational: true, capacity }
    }

    /// Source strength `I_s · C_s`.
    pub fn strength(&self) -> f64 {
        if self.operational {
            self.capacity
        } else {
            0.0
        }
    }
}

/// Coverage per node, in the network's node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageField {
    pub values: Vec<f64>,
    pub params: DiffusionParams,
    pub sources: Vec<StationSpec>,
    /// Minutes since the start of a transient run; `None` for steady states.
    pub time: Option<f64>,
}

fn source_vector(net: &StreetNetwork, stations: &[StationSpec]) -> Result<Vec<f64>> {
    let mut t = vec![0.0; net.node_count()];
    for s in stations {
        if !(s.capacity >= 0.0) || !s.capacity.is_finite() {
            return Err(Error::invalid("capacity", format!("station at `{}` has capacity {}", s.node, s.capacity)));
        }
        t[net.node_index(&s.node)?] += s.strength();
    }
    Ok(t)
}

fn operator_apply(net: &StreetNetwork, p: &DiffusionParams, u: &[f64], out: &mut [f64]) {
    net.laplacian_apply(u, out);
    for (o, ui) in out.iter_mut().zip(u) {
        *o = p.diffusion * *o + p.kappa * ui;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(D·L + κ·I) u = T`, solved by Jacobi-preconditioned conjugate gradients.
pub fn steady_state_solve(net: &StreetNetwork, params: &DiffusionParams, stations: &[StationSpec]) -> Result<CoverageField> {
    if params.kappa == 0.0 {
        return Err(Error::Singular { column: "kappa = 0: the Laplacian alone has a null space".into() });
    }
    let n = net.node_count();
    let rhs = source_vector(net, stations)?;
    let diag: Vec<f64> = (0..n).map(|i| params.diffusion * net.weighted_degree(i) + params.kappa).collect();
    let mut u: Vec<f64> = rhs.iter().zip(&diag).map(|(b, d)| b / d).collect();
    let mut au = vec![0.0; n];
    operator_apply(net, params, &u, &mut au);
    let mut r: Vec<f64> = rhs.iter().zip(&au).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let b_norm = dot(&rhs, &rhs).sqrt();
    let max_iter = 10 * n + 100;
    let mut ap = vec![0.0; n];
    let mut residual = if b_norm > 0.0 { dot(&r, &r).sqrt() / b_norm } else { 0.0 };
    let mut iterations = 0;
    while residual > CG_TOL && iterations < max_iter {
        operator_apply(net, params, &p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = dot(&r, &r).sqrt() / b_norm;
        iterations += 1;
    }
    if residual > CG_TOL {
        return Err(Error::NoConvergence { iterations, residual });
    }
    Ok(CoverageField { values: u, params: *params, sources: stations.to_vec(), time: None })
}

/// `‖(D·L + κI)u − T‖∞`.
pub fn steady_state_residual(net: &StreetNetwork, field: &CoverageField) -> Result<f64> {
    let rhs = source_vector(net, &field.sources)?;
    let mut au = vec![0.0; net.node_count()];
    operator_apply(net, &field.params, &field.values, &mut au);
    Ok(au.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `u₀ · exp(−κ_eff · d)`.
pub fn analytic_coverage(params: &DiffusionParams, u0: f64, d: f64) -> f64 {
    u0 * (-params.kappa_eff() * d).exp()
}

/// Distance at which coverage falls to the fraction `epsilon`: `−ln ε · √(D/κ)`.
pub fn critical_distance(params: &DiffusionParams, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} outside (0, 1]")));
    }
    if params.kappa == 0.0 {
        return Err(Error::InfiniteBoundary);
    }
    Ok(-epsilon.ln() / params.kappa_eff())
}

/// Half-effect distance `ln 2 / κ_eff`.
pub fn half_distance(kappa_eff: f64) -> Result<f64> {
    if kappa_eff == 0.0 {
        return Err(Error::InfiniteBoundary);
    }
    if !(kappa_eff > 0.0) {
        return Err(Error::invalid("kappa_eff", format!("{kappa_eff} is not positive")));
    }
    Ok(core::f64::consts::LN_2 / kappa_eff)
}

/// Largest stable explicit step `2 / (D · 2·max degree + κ)`.
pub fn stability_bound(net: &StreetNetwork, params: &DiffusionParams) -> f64 {
    2.0 / (params.diffusion * 2.0 * net.max_weighted_degree() + params.kappa)
}

/// Explicit Euler evolution of `∂u/∂t = −D·L·u − κ·u` with every station closed.
///
/// Returns the initial state, every `snapshot_every`-th step and the final step.
pub fn transient_coverage(
    net: &StreetNetwork,
    params: &DiffusionParams,
    initial: &CoverageField,
    horizon: f64,
    dt: f64,
    snapshot_every: usize,
) -> Result<Vec<CoverageField>> {
    let n = net.node_count();
    if initial.values.len() != n {
        return Err(Error::invalid("initial", format!("{} values for {n} nodes", initial.values.len())));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) || snapshot_every == 0 {
        return Err(Error::invalid("dt", "step, horizon and snapshot interval must be positive"));
    }
    let bound = stability_bound(net, params);
    if !(dt < bound) {
        return Err(Error::UnstableStep { dt, bound });
    }
    let steps = (horizon / dt).round() as usize;
    let snap = |u: &[f64], k: usize| CoverageField { values: u.to_vec(), params: *params, sources: Vec::new(), time: Some(k as f64 * dt) };
    let mut u = initial.values.clone();
    let mut lu = vec![0.0; n];
    let mut out = vec![snap(&u, 0)];
    for k in 1..=steps {
        net.laplacian_apply(&u, &mut lu);
        for i in 0..n {
            u[i] -= dt * (params.diffusion * lu[i] + params.kappa * u[i]);
        }
        if k % snapshot_every == 0 || k == steps {
            out.push(snap(&u, k));
        }
    }
    Ok(out)
}
