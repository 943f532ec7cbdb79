use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{inner_balayage, SweepMode};
use crate::energy::energy_form;
use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;
use crate::measures::{
    hahn_jordan_normalize, DiscreteMeasure, RegionMask, SignedDiscreteMeasure,
};
use crate::solvers::SolverOptions;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BatteryOptions {
    pub size: usize,
    pub seed: u64,
    /// Residuals are compared with `rel_tol * scale`.
    pub rel_tol: f64,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            size: 16,
            seed: 0,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Largest `|I(theta^A, omega)|` over the battery.
    pub scale: f64,
    pub threshold: f64,
    pub is_balayage: bool,
}

impl BatteryReport {
    fn from_parts(residuals: Vec<f64>, scale: f64, rel_tol: f64) -> Self {
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        let threshold = rel_tol * scale;
        Self {
            is_balayage: max_residual <= threshold,
            residuals,
            max_residual,
            scale,
            threshold,
        }
    }
}

/// Random positive weight vectors on `n_nodes` nodes: supports of size between
/// 1 and `n_nodes / 2`, weights uniform in `(0, 1]`.
pub fn test_battery(n_nodes: usize, size: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_support = (n_nodes / 2).max(1).min(n_nodes);
    (0..size)
        .map(|_| {
            let mut w = vec![0.0; n_nodes];
            if n_nodes == 0 {
                return w;
            }
            let k = rng.gen_range(1..=max_support);
            for i in sample(&mut rng, n_nodes, k) {
                w[i] = 1.0 - rng.gen::<f64>();
            }
            w
        })
        .collect()
}

fn battery_sweeps(
    m: &KernelMatrix,
    region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
    battery: &BatteryOptions,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if battery.size == 0 {
        return Err(Error::Parameter("battery size must be positive".into()));
    }
    test_battery(m.len(), battery.size, battery.seed)
        .into_iter()
        .map(|theta| {
            let t = DiscreteMeasure::new(m.nodes().clone(), theta)?;
            let swept = inner_balayage(m, &t, region, mode, opts)?.swept;
            Ok((t.weights().to_vec(), swept.weights().to_vec()))
        })
        .collect()
}

/// Tests whether `candidate` meets the symmetry relation
/// `I(candidate, theta) = I(theta^A, omega)` against a seeded battery.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_battery(
    m: &KernelMatrix,
    candidate: &DiscreteMeasure,
    omega: &DiscreteMeasure,
    region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
    battery: &BatteryOptions,
) -> Result<BatteryReport> {
    if !m.same_nodes(candidate.nodes()) || !m.same_nodes(omega.nodes()) {
        return Err(Error::NodeSetMismatch);
    }
    let sweeps = battery_sweeps(m, region, mode, opts, battery)?;
    let mut residuals = Vec::with_capacity(sweeps.len());
    let mut scale = 0.0f64;
    for (theta, theta_swept) in &sweeps {
        let lhs = energy_form(m, candidate.weights(), theta);
        let rhs = energy_form(m, theta_swept, omega.weights());
        scale = scale.max(rhs.abs());
        residuals.push((lhs - rhs).abs());
    }
    Ok(BatteryReport::from_parts(residuals, scale, battery.rel_tol))
}

/// `xi^A = (xi+)^A - (xi-)^A`, returned with disjoint parts.
pub fn signed_balayage(
    m: &KernelMatrix,
    xi: &SignedDiscreteMeasure,
    region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<SignedDiscreteMeasure> {
    let pos = inner_balayage(m, xi.positive(), region, mode, opts)?.swept;
    let neg = inner_balayage(m, xi.negative(), region, mode, opts)?.swept;
    Ok(hahn_jordan_normalize(&SignedDiscreteMeasure::new(pos, neg)?))
}

/// Symmetry relation `I(xi^A, theta) = I(theta^A, xi)` for a signed measure.
/// The scale is taken from the two parts separately, so that cancellation in
/// `xi` does not shrink the threshold to nothing.
pub fn signed_symmetry_battery(
    m: &KernelMatrix,
    xi: &SignedDiscreteMeasure,
    region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
    battery: &BatteryOptions,
) -> Result<BatteryReport> {
    if !m.same_nodes(xi.nodes()) {
        return Err(Error::NodeSetMismatch);
    }
    let swept = signed_balayage(m, xi, region, mode, opts)?.signed_weights();
    let xi_w = xi.signed_weights();
    let sweeps = battery_sweeps(m, region, mode, opts, battery)?;
    let mut residuals = Vec::with_capacity(sweeps.len());
    let mut scale = 0.0f64;
    for (theta, theta_swept) in &sweeps {
        let lhs = energy_form(m, &swept, theta);
        let rhs = energy_form(m, theta_swept, &xi_w);
        let parts = energy_form(m, theta_swept, xi.positive().weights()).abs()
            + energy_form(m, theta_swept, xi.negative().weights()).abs();
        scale = scale.max(parts);
        residuals.push((lhs - rhs).abs());
    }
    Ok(BatteryReport::from_parts(residuals, scale, battery.rel_tol))
}
