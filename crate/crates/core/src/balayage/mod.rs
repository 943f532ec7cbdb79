//! Sweeping of discrete measures onto node regions, equilibrium measures, and
//! the certification checks built on them.
//!
//! The swept measure `omega^A` minimizes the Gauss functional
//! `I(mu) - 2 I(mu, omega)` over positive `mu` carried by `A` with
//! `mu(X) <= H = omega(X)`. Its KKT conditions are the discrete form of
//! "`U^{omega^A} = U^omega` nearly everywhere on `A`": equality at every active
//! node and `U^{omega^A} >= U^omega` at the remaining nodes of `A`, which play
//! the role of the exceptional set.

mod battery;
mod checks;
mod exhaustion;

use serde::{Deserialize, Serialize};

use crate::energy::{dot, energy_form};
use crate::error::{Error, Result};
use crate::kernels::{KernelMatrix, KernelSpec};
use crate::measures::{total_mass, DiscreteMeasure, RegionMask};
use crate::solvers::{projection_onto_cone, solve_nnqp, KktReport, NnqpProblem, SolverOptions};

pub use battery::{
    signed_balayage, signed_symmetry_battery, test_battery, uniqueness_battery, BatteryOptions,
    BatteryReport,
};
pub use checks::{
    balayage_with_rest, mass_formula_check, minimum_mass_check, positivity_of_mass,
    MassFormulaReport, MinimumMassReport, ProbeKind, ProbeRecord, RestReport,
};
pub use exhaustion::{exhaust_and_sweep, ExhaustionReport, StageRecord};

/// Which variational problem produces the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Gauss functional with the total-mass cap `H = omega(X)`.
    #[default]
    GaussCapped,
    /// Energy-norm projection of `omega` onto the cone of measures on the region.
    Projection,
}

/// A swept measure with its certification diagnostics.
#[derive(Debug, Clone)]
pub struct BalayageResult {
    pub swept: DiscreteMeasure,
    pub mode: SweepMode,
    pub kkt: KktReport,
    /// Mass-cap multiplier; zero when the cap is inactive.
    pub multiplier: f64,
    /// Global indices of the active nodes.
    pub active_nodes: Vec<usize>,
    /// Max over active nodes of `|U^{omega^A} - U^omega|`.
    pub potential_on_a_max_gap: f64,
    /// Max over all nodes of `(U^{omega^A} - U^omega)+`.
    pub domination_violation: f64,
    /// `|I(omega^A) - I(omega^A, omega)|`.
    pub energy_identity_gap: f64,
    pub mass: f64,
    pub gauss_value: f64,
    pub energy: f64,
    pub mutual_energy_with_source: f64,
    pub source_energy: f64,
    pub source_potential: Vec<f64>,
    pub swept_potential: Vec<f64>,
}

impl BalayageResult {
    pub fn cap_active(&self) -> bool {
        self.multiplier > 0.0
    }

    /// Largest potential value seen; the natural scale for absolute gaps.
    pub fn potential_scale(&self) -> f64 {
        self.source_potential
            .iter()
            .chain(&self.swept_potential)
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn check_inputs(m: &KernelMatrix, omega: &DiscreteMeasure, region: &RegionMask) -> Result<()> {
    if !m.same_nodes(omega.nodes()) || !m.same_nodes(region.nodes()) {
        return Err(Error::NodeSetMismatch);
    }
    region.require_nonempty()
}

/// Sweeps `omega` onto `region`.
pub fn inner_balayage(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<BalayageResult> {
    check_inputs(m, omega, region)?;
    let idx = region.indices();
    let source_potential = m.apply(omega.weights());
    if omega.is_zero() {
        let zero = DiscreteMeasure::zero(m.nodes().clone());
        let report = KktReport {
            tolerance: opts.tol,
            ..Default::default()
        };
        return Ok(diagnose(m, omega, zero, source_potential, mode, report, 0.0, opts.tol));
    }
    let solution = match mode {
        SweepMode::GaussCapped => {
            let b: Vec<f64> = idx.iter().map(|&i| source_potential[i]).collect();
            let cap = KernelSpec::MAX_PRINCIPLE_CONSTANT * total_mass(omega);
            let problem = NnqpProblem::from_kernel(m, &idx, b, Some(cap))?;
            solve_nnqp(&problem, opts)?
        }
        SweepMode::Projection => projection_onto_cone(m, omega, region, opts)?,
    };
    let mut weights = vec![0.0; m.len()];
    for (&i, &w) in idx.iter().zip(&solution.weights) {
        weights[i] = w;
    }
    let swept = DiscreteMeasure::new(m.nodes().clone(), weights)?;
    let mut kkt = solution.report;
    kkt.active_set = kkt.active_set.iter().map(|&k| idx[k]).collect();
    Ok(diagnose(
        m,
        omega,
        swept,
        source_potential,
        mode,
        kkt,
        solution.multiplier,
        opts.tol,
    ))
}

/// Sweep of `omega` with no diagnostics kept beyond the measure.
pub fn sweep(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<DiscreteMeasure> {
    Ok(inner_balayage(m, omega, region, mode, opts)?.swept)
}

#[allow(clippy::too_many_arguments)]
fn diagnose(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    swept: DiscreteMeasure,
    source_potential: Vec<f64>,
    mode: SweepMode,
    kkt: KktReport,
    multiplier: f64,
    tol: f64,
) -> BalayageResult {
    let swept_potential = m.apply(swept.weights());
    let wmax = swept.weights().iter().copied().fold(0.0, f64::max);
    let active_nodes: Vec<usize> = (0..swept.len())
        .filter(|&i| swept.weights()[i] > tol * wmax && swept.weights()[i] > 0.0)
        .collect();
    let potential_on_a_max_gap = active_nodes
        .iter()
        .map(|&i| (swept_potential[i] - source_potential[i]).abs())
        .fold(0.0, f64::max);
    let domination_violation = swept_potential
        .iter()
        .zip(&source_potential)
        .map(|(a, b)| (a - b).max(0.0))
        .fold(0.0, f64::max);
    let energy = dot(swept.weights(), &swept_potential);
    let mutual = dot(swept.weights(), &source_potential);
    let source_energy = dot(omega.weights(), &source_potential);
    BalayageResult {
        mass: total_mass(&swept),
        gauss_value: energy - 2.0 * mutual,
        energy_identity_gap: (energy - mutual).abs(),
        energy,
        mutual_energy_with_source: mutual,
        source_energy,
        swept,
        mode,
        kkt,
        multiplier,
        active_nodes,
        potential_on_a_max_gap,
        domination_violation,
        source_potential,
        swept_potential,
    }
}

/// Equilibrium measure of a region with its capacity.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub gamma: DiscreteMeasure,
    pub capacity: f64,
    /// `I(gamma)`, equal to the capacity at the optimum.
    pub energy: f64,
    pub potential: Vec<f64>,
    pub potential_min_on_a: f64,
    pub potential_max_on_support: f64,
    pub kkt: KktReport,
}

impl EquilibriumResult {
    /// `|capacity - I(gamma)|`.
    pub fn identity_gap(&self) -> f64 {
        (self.capacity - self.energy).abs()
    }
}

/// Minimizes `1/2 w'Qw - 1'w` over `w >= 0` on the region: the potential is 1
/// on the support and at least 1 on the rest of the region.
pub fn equilibrium_measure(
    m: &KernelMatrix,
    region: &RegionMask,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    if !m.same_nodes(region.nodes()) {
        return Err(Error::NodeSetMismatch);
    }
    region.require_nonempty()?;
    let idx = region.indices();
    let problem = NnqpProblem::from_kernel(m, &idx, vec![1.0; idx.len()], None)?;
    let solution = solve_nnqp(&problem, opts)?;
    let mut weights = vec![0.0; m.len()];
    for (&i, &w) in idx.iter().zip(&solution.weights) {
        weights[i] = w;
    }
    let gamma = DiscreteMeasure::new(m.nodes().clone(), weights)?;
    let potential = m.apply(gamma.weights());
    let mut kkt = solution.report;
    kkt.active_set = kkt.active_set.iter().map(|&k| idx[k]).collect();
    let potential_min_on_a = idx
        .iter()
        .map(|&i| potential[i])
        .fold(f64::INFINITY, f64::min);
    let potential_max_on_support = kkt
        .active_set
        .iter()
        .map(|&i| potential[i])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EquilibriumResult {
        capacity: total_mass(&gamma),
        energy: energy_form(m, gamma.weights(), gamma.weights()),
        gamma,
        potential,
        potential_min_on_a,
        potential_max_on_support,
        kkt,
    })
}
