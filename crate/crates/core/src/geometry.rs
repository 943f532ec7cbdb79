//! Node-set builders: lattices, sphere shells, and seeded random clouds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::NodeSet;

/// Points of a sphere shell with equal quadrature weights `4 pi r^2 / count`.
///
/// The nodes sit at the centres of equal-height (hence equal-area) latitude
/// bands and advance by the golden angle in longitude.
pub fn sphere_shell_points(center: &[f64; 3], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (1.0 + 5f64.sqrt());
    (0..count)
        .map(|i| {
            let t = (i as f64 + 0.5) / count as f64;
            let z = 1.0 - 2.0 * t;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * (i as f64 + 0.5);
            vec![
                center[0] + radius * rho * phi.cos(),
                center[1] + radius * rho * phi.sin(),
                center[2] + radius * z,
            ]
        })
        .collect()
}

pub fn sphere_shell(center: &[f64; 3], radius: f64, count: usize) -> Result<NodeSet> {
    if !(radius > 0.0) || count == 0 {
        return Err(Error::Parameter("sphere shell needs a positive radius and count".into()));
    }
    let w = 4.0 * PI * radius * radius / count as f64;
    NodeSet::new(sphere_shell_points(center, radius, count), vec![w; count])
}

/// Tensor lattice with `counts[d]` points per axis spanning `[min[d], max[d]]`.
pub fn grid(min: &[f64], max: &[f64], counts: &[usize]) -> Result<NodeSet> {
    let dim = min.len();
    if max.len() != dim || counts.len() != dim || dim == 0 {
        return Err(Error::Parameter("grid bounds and counts must share a dimension".into()));
    }
    if counts.contains(&0) {
        return Err(Error::Parameter("grid counts must be positive".into()));
    }
    let step: Vec<f64> = (0..dim)
        .map(|d| {
            if counts[d] > 1 {
                (max[d] - min[d]) / (counts[d] - 1) as f64
            } else {
                0.0
            }
        })
        .collect();
    let cell: f64 = step.iter().map(|s| if *s > 0.0 { *s } else { 1.0 }).product();
    let total: usize = counts.iter().product();
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        points.push((0..dim).map(|d| min[d] + step[d] * idx[d] as f64).collect());
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    NodeSet::new(points, vec![cell; total])
}

/// Uniform random points in a box, deterministic in the seed.
pub fn random_cloud_points(count: usize, min: &[f64], max: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            min.iter()
                .zip(max)
                .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect()
        })
        .collect()
}

pub fn random_cloud(count: usize, min: &[f64], max: &[f64], seed: u64) -> Result<NodeSet> {
    if min.len() != max.len() || min.is_empty() || count == 0 {
        return Err(Error::Parameter("random cloud needs matching bounds and a positive count".into()));
    }
    let volume: f64 = min.iter().zip(max).map(|(a, b)| (b - a).abs()).product();
    let w = if volume > 0.0 { volume / count as f64 } else { 1.0 };
    NodeSet::new(random_cloud_points(count, min, max, seed), vec![w; count])
}
