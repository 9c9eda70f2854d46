//! Integration grids on `𝕊ⁿ` (blended chart atlas) and on the flat torus.
//!
//! Node weights cover the parameter-space rule and the partition of unity;
//! the immersion's own volume density `√det g_ab` is supplied by the caller.

use crate::error::{Error, Result};
use crate::immersions::{Domain, SphereAtlas};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Smaller weights than this are dropped from sphere grids.
pub const WEIGHT_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub chart: usize,
    pub t: Vec<f64>,
    /// Parameter rule weight times partition-of-unity weight.
    pub weight: f64,
    /// Round-sphere density of the chart at `t` (1 on the torus).
    pub chart_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationGrid {
    pub n: usize,
    pub domain: Domain,
    pub resolution: usize,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub resolution: usize,
    /// See [`geometric_error_estimate`].
    pub error_estimate: f64,
}

/// Partition-of-unity weight of chart `c` at the unit vector `u`:
/// `Σ_{i ∈ S_c} u_i²` for index sets `S_c` partitioning `{0, …, n}`, each
/// contained in the chart's singular pair. The weights are polynomial and
/// sum to one, so blended integrands stay analytic in every chart.
pub fn blend_weight(atlas: &SphereAtlas, chart: usize, u: &[f64]) -> f64 {
    let bump = |c: usize| -> f64 { blend_set(atlas, c).iter().map(|&i| u[i] * u[i]).sum() };
    let total: f64 = (0..atlas.num_charts()).map(bump).sum();
    bump(chart) / total
}

fn blend_set(atlas: &SphereAtlas, chart: usize) -> Vec<usize> {
    let (a, b) = atlas.singular_pair(chart);
    let taken_elsewhere = |i: usize| {
        (0..chart).any(|c| {
            let (p, q) = atlas.singular_pair(c);
            p == i || q == i
        })
    };
    [a, b].into_iter().filter(|&i| !taken_elsewhere(i)).collect()
}

pub fn build_grid(n: usize, resolution: usize, domain: Domain) -> Result<IntegrationGrid> {
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} must be at least 8"
        )));
    }
    if !(2..=4).contains(&n) {
        return Err(Error::Unsupported(format!("integration grids for n = {n}")));
    }
    let mut nodes = Vec::new();
    let trap: Vec<f64> = (0..resolution)
        .map(|k| 2.0 * PI * k as f64 / resolution as f64)
        .collect();
    let trap_w = 2.0 * PI / resolution as f64;
    match domain {
        Domain::Torus => {
            for_each_index(n, resolution, |idx| {
                nodes.push(Node {
                    chart: 0,
                    t: idx.iter().map(|&k| trap[k]).collect(),
                    weight: trap_w.powi(n as i32),
                    chart_density: 1.0,
                });
            });
        }
        Domain::Sphere => {
            let atlas = SphereAtlas::new(n)?;
            let (gx, gw) = gauss_legendre(resolution);
            let polar: Vec<f64> = gx.iter().map(|x| PI * (x + 1.0) / 2.0).collect();
            let polar_w: Vec<f64> = gw.iter().map(|w| PI * w / 2.0).collect();
            for chart in 0..atlas.num_charts() {
                for_each_index(n, resolution, |idx| {
                    let mut t = Vec::with_capacity(n);
                    let mut w = trap_w;
                    for &k in &idx[..n - 1] {
                        t.push(polar[k]);
                        w *= polar_w[k];
                    }
                    t.push(trap[idx[n - 1]]);
                    let u = atlas.map_values(chart, &t);
                    let blend = blend_weight(&atlas, chart, &u);
                    if blend < WEIGHT_CUTOFF {
                        return;
                    }
                    let chart_density = atlas.density(&t);
                    nodes.push(Node {
                        chart,
                        t,
                        weight: w * blend,
                        chart_density,
                    });
                });
            }
        }
    }
    Ok(IntegrationGrid {
        n,
        domain,
        resolution,
        nodes,
    })
}

fn for_each_index(n: usize, res: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; n];
    loop {
        f(&idx);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < res {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Neumaier-compensated sum, evaluated sequentially in slice order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl IntegrationGrid {
    /// Evaluate `f` at every node in parallel, keeping node order.
    pub fn map_nodes<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &Node) -> Result<T> + Sync,
    {
        self.nodes
            .par_iter()
            .enumerate()
            .map(|(i, node)| {
                f(i, node).map_err(|e| Error::Node {
                    chart: node.chart,
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// `Σ weight · density · value`, with `density` and `value` per node.
    pub fn weighted_sum(&self, densities: &[f64], values: &[f64]) -> f64 {
        compensated_sum(
            self.nodes
                .iter()
                .zip(densities)
                .zip(values)
                .map(|((node, d), v)| node.weight * d * v),
        )
    }

    /// `∫ f dV` for the round sphere (or flat parameter torus).
    pub fn integrate_round<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&Node) -> Result<f64> + Sync,
    {
        let vals = self.map_nodes(|_, node| f(node).map(|v| v * node.chart_density))?;
        let ones = vec![1.0; vals.len()];
        Ok(self.weighted_sum(&ones, &vals))
    }
}

/// Resolutions `(3 res / 4, res / 2)` of the two companion grids used for
/// error estimates.
pub fn estimate_resolutions(resolution: usize) -> (usize, usize) {
    ((3 * resolution / 4).max(8), (resolution / 2).max(8))
}

/// Safety factor on the extrapolated error.
pub const ESTIMATE_SAFETY: f64 = 20.0;

/// Error estimate for `fine` from integrals on three nested resolutions
/// `res > 3 res / 4 > res / 2`.
///
/// Convergence is geometric, so `d₁ = |I(res) − I(3res/4)|` is essentially
/// the error of the middle grid. When the differences contract clearly
/// (`q = d₁/d₀ ≤ 1/4`), the fine-grid error is extrapolated as
/// `ESTIMATE_SAFETY · d₁ · q`, capped by `d₁`; otherwise `d₁` itself is used.
pub fn geometric_error_estimate(fine: f64, mid: f64, coarse: f64) -> f64 {
    let d1 = (fine - mid).abs();
    let d0 = (mid - coarse).abs();
    if !(d1.is_finite() && d0.is_finite()) {
        return f64::NAN;
    }
    if d0 > 0.0 && d1 <= 0.25 * d0 {
        d1.min(ESTIMATE_SAFETY * d1 * (d1 / d0))
    } else {
        d1
    }
}

/// `∫ f dV` at `resolution` with an error estimate from the companion grids.
pub fn integrate<F>(n: usize, resolution: usize, domain: Domain, f: F) -> Result<IntegralResult>
where
    F: Fn(&Node) -> Result<f64> + Sync,
{
    let (mid, coarse) = estimate_resolutions(resolution);
    let full = build_grid(n, resolution, domain)?.integrate_round(&f)?;
    let i_mid = build_grid(n, mid, domain)?.integrate_round(&f)?;
    let i_coarse = build_grid(n, coarse, domain)?.integrate_round(&f)?;
    Ok(IntegralResult {
        value: full,
        resolution,
        error_estimate: geometric_error_estimate(full, i_mid, i_coarse),
    })
}

/// Default points per angular dimension.
pub fn default_resolution(n: usize) -> usize {
    match n {
        2 => 48,
        3 => 32,
        _ => 20,
    }
}

pub fn sphere_volume(n: usize) -> f64 {
    // 2π^{(n+1)/2} / Γ((n+1)/2)
    match n {
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        3 => 2.0 * PI * PI,
        4 => 8.0 * PI * PI / 3.0,
        _ => {
            let mut v = [2.0, 2.0 * PI];
            for k in 2..=n {
                let next = 2.0 * PI * v[0] / (k - 1) as f64;
                v = [v[1], next];
            }
            v[1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m12 - 2.0 / 13.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    #[test]
    fn sphere_volumes() {
        let v2 = build_grid(2, 32, Domain::Sphere).unwrap().integrate_round(|_| Ok(1.0)).unwrap();
        assert!((v2 - 4.0 * PI).abs() < 1e-12, "{}", v2 - 4.0 * PI);
        let v3 = build_grid(3, 24, Domain::Sphere).unwrap().integrate_round(|_| Ok(1.0)).unwrap();
        assert!((v3 - 2.0 * PI * PI).abs() / v3 < 1e-10, "{}", v3 - 2.0 * PI * PI);
        let v4 = build_grid(4, 20, Domain::Sphere).unwrap().integrate_round(|_| Ok(1.0)).unwrap();
        assert!((v4 - sphere_volume(4)).abs() / v4 < 1e-10, "{}", v4 - sphere_volume(4));
    }

    #[test]
    fn blend_weights_partition_unity() {
        for n in 2..=4 {
            let atlas = SphereAtlas::new(n).unwrap();
            let u: Vec<f64> = (0..=n).map(|i| (i as f64 + 0.5) / 3.0).collect();
            let r: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u: Vec<f64> = u.iter().map(|x| x / r).collect();
            let total: f64 = (0..atlas.num_charts()).map(|c| blend_weight(&atlas, c, &u)).sum();
            assert!((total - 1.0).abs() < 1e-15);
            let mut covered: Vec<usize> = (0..atlas.num_charts()).flat_map(|c| blend_set(&atlas, c)).collect();
            covered.sort();
            assert_eq!(covered, (0..=n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn torus_volume() {
        let g = build_grid(2, 8, Domain::Torus).unwrap();
        let v = g.integrate_round(|_| Ok(1.0)).unwrap();
        assert!((v - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(build_grid(2, 4, Domain::Sphere).is_err());
        assert!(build_grid(5, 16, Domain::Sphere).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s = compensated_sum([1e16, 1.0, -1e16, 1.0]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn volume_formula() {
        assert!((sphere_volume(5) - PI.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn error_estimate_extrapolates_only_clear_contraction() {
        // Geometric errors 1e-2, 1e-5, 1e-8 on grids m/2, 3m/4, m.
        let exact = 1.0;
        let e = geometric_error_estimate(exact + 1e-8, exact + 1e-5, exact + 1e-2);
        assert!(e >= 1e-8 && e <= ESTIMATE_SAFETY * 1.01e-8, "{e:e}");
        // Stalled convergence: fall back to the plain difference.
        let e = geometric_error_estimate(1.0, 1.0 + 1e-4, 1.0 + 2e-4);
        assert_eq!(e, (1.0f64 - (1.0 + 1e-4)).abs());
        assert_eq!(geometric_error_estimate(2.0, 2.0, 2.0), 0.0);
        assert!(geometric_error_estimate(f64::NAN, 1.0, 1.0).is_nan());
        assert_eq!(estimate_resolutions(48), (36, 24));
        assert_eq!(estimate_resolutions(10), (8, 8));
    }
}
