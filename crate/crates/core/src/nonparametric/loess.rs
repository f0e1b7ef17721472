use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{check_grid, sorted_pairs, CurveEstimate, KernelConfig, Method};
use crate::data::EffectivenessSeries;
use crate::linalg::{Cholesky, SquareMatrix};
use crate::{Error, Result};

/// Minimum neighbourhood size for a local quadratic.
const MIN_NEIGHBOURS: usize = 4;

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let a = 1.0 - u * u * u;
        a * a * a
    }
}

/// Index range of the `k` observations nearest to `x` in ascending `t`.
fn nearest(t: &[f64], x: f64, k: usize) -> (usize, usize) {
    let split = t.partition_point(|v| *v < x);
    let (mut lo, mut hi) = (split, split);
    while hi - lo < k {
        let take_left = match (lo > 0, hi < t.len()) {
            (true, true) => x - t[lo - 1] <= t[hi] - x,
            (left, _) => left,
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Weighted polynomial fit of the given degree in `u`; returns the intercept.
fn local_poly(u: &[f64], y: &[f64], w: &[f64], degree: usize) -> Option<f64> {
    let p = degree + 1;
    let mut a = SquareMatrix::zeros(p);
    let mut b = alloc::vec![0.0; p];
    for i in 0..u.len() {
        if w[i] == 0.0 {
            continue;
        }
        let mut powers = [1.0; 3];
        for j in 1..p {
            powers[j] = powers[j - 1] * u[i];
        }
        for r in 0..p {
            b[r] += w[i] * powers[r] * y[i];
            for c in 0..p {
                a.add(r, c, w[i] * powers[r] * powers[c]);
            }
        }
    }
    let chol = Cholesky::new(&a).ok()?;
    Some(chol.solve(&b)[0])
}

/// Degree-2 local regression with tricube weights over the nearest `⌈span·n⌉` points.
pub fn loess_regress(series: &EffectivenessSeries, config: &KernelConfig, grid: &[f64]) -> Result<CurveEstimate> {
    if config.method != Method::LoessDeg2 {
        return Err(Error::invalid("method", "configuration names a different estimator"));
    }
    config.validate()?;
    check_grid(grid)?;
    let (t, tau) = sorted_pairs(series);
    let n = t.len();
    // guard against span·n landing a hair above an integer
    let k = ((config.loess_span * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1));
    if n == 0 || k < MIN_NEIGHBOURS {
        return Err(Error::InsufficientData { needed: MIN_NEIGHBOURS, got: if n == 0 { 0 } else { k } });
    }
    let mut fallback_points = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    for (gi, &x) in grid.iter().enumerate() {
        let (lo, hi) = nearest(&t, x, k);
        let reach = (x - t[lo]).max(t[hi - 1] - x);
        let (u, w): (Vec<f64>, Vec<f64>) = t[lo..hi]
            .iter()
            .map(|&ti| {
                if reach > 0.0 {
                    let u = (ti - x) / reach;
                    (u, tricube(u.abs()))
                } else {
                    (0.0, 1.0)
                }
            })
            .unzip();
        let y = &tau[lo..hi];
        let v = local_poly(&u, y, &w, 2).or_else(|| {
            fallback_points.push(gi);
            local_poly(&u, y, &w, 1).or_else(|| local_poly(&u, y, &w, 0))
        });
        values.push(v);
    }
    Ok(CurveEstimate { grid: grid.to_vec(), values, config: *config, fallback_points, selected_penalty: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn obs(t: &[f64], tau: &[f64]) -> EffectivenessSeries {
        EffectivenessSeries::from_observations(t.to_vec(), tau.to_vec()).unwrap()
    }

    fn cfg(span: f64) -> KernelConfig {
        let mut c = KernelConfig::new(Method::LoessDeg2, 1.0);
        c.loess_span = span;
        c
    }

    #[test]
    fn nearest_window() {
        let t = [0.0, 1.0, 2.0, 3.0, 10.0];
        assert_eq!(nearest(&t, 2.2, 3), (1, 4));
        assert_eq!(nearest(&t, -5.0, 2), (0, 2));
        assert_eq!(nearest(&t, 50.0, 2), (3, 5));
    }

    #[test]
    fn quadratic_exact_with_full_span() {
        let t: Vec<f64> = (0..12).map(|i| 0.5 * i as f64).collect();
        let tau: Vec<f64> = t.iter().map(|x| 0.9 - 0.2 * x + 0.025 * x * x).collect();
        let grid = math::linspace(0.0, 5.5, 23);
        let c = loess_regress(&obs(&t, &tau), &cfg(1.0), &grid).unwrap();
        for (g, v) in grid.iter().zip(&c.values) {
            assert_relative_eq!(v.unwrap(), 0.9 - 0.2 * g + 0.025 * g * g, epsilon = 1e-10);
        }
    }

    #[test]
    fn constant_data_constant_curve() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let c = loess_regress(&obs(&t, &[0.3; 10]), &cfg(1.0), &math::linspace(0.0, 9.0, 7)).unwrap();
        for v in c.values {
            assert_relative_eq!(v.unwrap(), 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_direct_weighted_solve() {
        let t = vec![0.3, 1.1, 1.7, 2.4, 2.9, 3.3, 4.8, 5.5, 6.1, 7.9];
        let tau = vec![0.81, 0.52, 0.44, 0.31, 0.36, 0.22, 0.19, 0.15, 0.17, 0.09];
        let x0 = 3.0;
        let c = loess_regress(&obs(&t, &tau), &cfg(0.6), &[x0]).unwrap();
        // six nearest points of x0 and tricube weights on raw distances
        let mut idx: Vec<usize> = (0..10).collect();
        idx.sort_by(|a, b| (t[*a] - x0).abs().total_cmp(&(t[*b] - x0).abs()));
        let near = &idx[..6];
        let reach = near.iter().map(|&i| (t[i] - x0).abs()).fold(0.0, f64::max);
        let mut m = nalgebra::Matrix3::<f64>::zeros();
        let mut r = nalgebra::Vector3::<f64>::zeros();
        for &i in near {
            let d = t[i] - x0;
            let w = (1.0 - (d.abs() / reach).powi(3)).powi(3);
            let phi = nalgebra::Vector3::new(1.0, d, d * d);
            m += w * phi * phi.transpose();
            r += w * tau[i] * phi;
        }
        let beta = m.lu().solve(&r).unwrap();
        assert_relative_eq!(c.values[0].unwrap(), beta[0], epsilon = 1e-8);
    }

    #[test]
    fn too_few_neighbours() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let tau = vec![0.5; 10];
        assert_eq!(loess_regress(&obs(&t, &tau), &cfg(0.3), &[1.0]).unwrap_err(), Error::InsufficientData { needed: 4, got: 3 });
        assert!(loess_regress(&obs(&t, &tau), &cfg(0.4), &[1.0]).is_ok());
    }
}
