use serde::Serialize;

use super::{equilibrium_measure, inner_balayage, BalayageResult, SweepMode};
use crate::energy::weight_distance;
use crate::error::Result;
use crate::kernels::KernelMatrix;
use crate::measures::{DiscreteMeasure, Exhaustion};
use crate::solvers::SolverOptions;

/// One stage of an exhaustion run.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub size: usize,
    pub mass: f64,
    pub energy: f64,
    pub gauss_value: f64,
    pub potential: Vec<f64>,
    pub capacity: f64,
    pub equilibrium_potential: Vec<f64>,
}

/// Sweeps onto every stage of an exhaustion, in order.
#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionReport {
    pub stages: Vec<StageRecord>,
    /// `||omega^{K_j} - omega^A||` with `A` the last stage.
    pub distances_to_final: Vec<f64>,
    /// Max over stages and nodes of `(U_j - U_{j+1})+`.
    pub potential_monotonicity_defect: f64,
    /// Max over stages of `(d_{j+1} - d_j)+`.
    pub distance_monotonicity_defect: f64,
    /// Same as the potential defect, for the equilibrium potentials.
    pub equilibrium_monotonicity_defect: f64,
    #[serde(skip)]
    pub final_result: Option<BalayageResult>,
}

fn monotonicity_defect(seq: &[Vec<f64>]) -> f64 {
    seq.windows(2)
        .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).max(0.0)))
        .fold(0.0, f64::max)
}

pub fn exhaust_and_sweep(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    exhaustion: &Exhaustion,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<ExhaustionReport> {
    let mut results = Vec::with_capacity(exhaustion.len());
    let mut stages = Vec::with_capacity(exhaustion.len());
    for stage in exhaustion.stages() {
        let r = inner_balayage(m, omega, stage, mode, opts)?;
        let eq = equilibrium_measure(m, stage, opts)?;
        stages.push(StageRecord {
            size: stage.count(),
            mass: r.mass,
            energy: r.energy,
            gauss_value: r.gauss_value,
            potential: r.swept_potential.clone(),
            capacity: eq.capacity,
            equilibrium_potential: eq.potential,
        });
        results.push(r);
    }
    let last = results.last().expect("exhaustions are non-empty");
    let distances_to_final: Vec<f64> = results
        .iter()
        .map(|r| weight_distance(m, r.swept.weights(), last.swept.weights()))
        .collect();
    let potentials: Vec<Vec<f64>> = stages.iter().map(|s| s.potential.clone()).collect();
    let eq_potentials: Vec<Vec<f64>> = stages
        .iter()
        .map(|s| s.equilibrium_potential.clone())
        .collect();
    let distance_monotonicity_defect = distances_to_final
        .windows(2)
        .map(|w| (w[1] - w[0]).max(0.0))
        .fold(0.0, f64::max);
    Ok(ExhaustionReport {
        potential_monotonicity_defect: monotonicity_defect(&potentials),
        equilibrium_monotonicity_defect: monotonicity_defect(&eq_potentials),
        distance_monotonicity_defect,
        distances_to_final,
        stages,
        final_result: results.pop(),
    })
}
