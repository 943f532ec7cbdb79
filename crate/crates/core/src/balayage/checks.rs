use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{equilibrium_measure, inner_balayage, BalayageResult, SweepMode};
use crate::energy::{dot, weight_distance};
use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;
use crate::measures::{total_mass, DiscreteMeasure, RegionMask};
use crate::solvers::SolverOptions;

/// Direct sweep onto `Q` against sweeping first onto `A` and then onto `Q`.
#[derive(Debug, Clone)]
pub struct RestReport {
    /// `omega^A`.
    pub outer: BalayageResult,
    /// `omega^Q`.
    pub direct: BalayageResult,
    /// `(omega^A)^Q`.
    pub iterated: BalayageResult,
    /// `||omega^Q - (omega^A)^Q||`.
    pub strong_distance: f64,
    /// Max over all nodes of `(U^{omega^Q} - U^{omega^A})+`.
    pub monotonicity_gap: f64,
}

pub fn balayage_with_rest(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    outer_region: &RegionMask,
    inner_region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<RestReport> {
    if !inner_region.is_subset_of(outer_region) {
        return Err(Error::Parameter("inner region is not contained in the outer region".into()));
    }
    let outer = inner_balayage(m, omega, outer_region, mode, opts)?;
    let direct = inner_balayage(m, omega, inner_region, mode, opts)?;
    let iterated = inner_balayage(m, &outer.swept, inner_region, mode, opts)?;
    let strong_distance = weight_distance(m, direct.swept.weights(), iterated.swept.weights());
    let monotonicity_gap = direct
        .swept_potential
        .iter()
        .zip(&outer.swept_potential)
        .map(|(q, a)| (q - a).max(0.0))
        .fold(0.0, f64::max);
    Ok(RestReport {
        outer,
        direct,
        iterated,
        strong_distance,
        monotonicity_gap,
    })
}

/// Swept mass against the integral of the equilibrium potential.
#[derive(Debug, Clone, Serialize)]
pub struct MassFormulaReport {
    /// `omega^A(X)`.
    pub lhs: f64,
    /// `sum_y U^{gamma_A}(y) omega(y)`.
    pub rhs: f64,
    pub gap: f64,
    /// Max over region nodes of `|U^{gamma_A} - 1|`.
    pub equilibrium_deviation: f64,
    pub capacity: f64,
}

impl MassFormulaReport {
    /// Whether the equilibrium potential equals 1 on the whole region within `tol`,
    /// the condition under which the identity is exact on a finite node set.
    pub fn equilibrium_settled(&self, tol: f64) -> bool {
        self.equilibrium_deviation <= tol
    }
}

pub fn mass_formula_check(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    region: &RegionMask,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<MassFormulaReport> {
    let sweep = inner_balayage(m, omega, region, mode, opts)?;
    let eq = equilibrium_measure(m, region, opts)?;
    let lhs = sweep.mass;
    let rhs = dot(&eq.potential, omega.weights());
    let equilibrium_deviation = region
        .indices()
        .iter()
        .map(|&i| (eq.potential[i] - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(MassFormulaReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        equilibrium_deviation,
        capacity: eq.capacity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProbeKind {
    /// The swept measure itself.
    Swept,
    /// Swept measure plus a positive bump anywhere.
    Bump,
    /// `a omega + (1 - a) omega^A`.
    Convex { a: f64 },
}

/// One member of the dominating class and how it compares with the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub kind: ProbeKind,
    pub mass: f64,
    /// Mass predicted by construction (additivity / convexity).
    pub expected_mass: f64,
    pub norm: f64,
    /// Min over region nodes of `U^nu - U^omega`; non-negative for class members.
    pub class_margin: f64,
    /// Min over active nodes of `U^nu - U^{omega^A}`.
    pub active_potential_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimumMassReport {
    pub swept_mass: f64,
    pub swept_norm: f64,
    pub probes: Vec<ProbeRecord>,
    /// Largest potential value, for scaling absolute margins.
    pub potential_scale: f64,
}

impl MinimumMassReport {
    pub fn probe_masses(&self) -> Vec<f64> {
        self.probes.iter().map(|p| p.mass).collect()
    }

    pub fn all_in_class(&self, tol: f64) -> bool {
        self.probes.iter().all(|p| p.class_margin >= -tol)
    }

    /// Sweep has the smallest mass among the probes.
    pub fn mass_minimal(&self, tol: f64) -> bool {
        self.probes.iter().all(|p| self.swept_mass <= p.mass + tol)
    }

    /// Sweep has the smallest potential at the active nodes.
    pub fn potential_minimal(&self, tol: f64) -> bool {
        self.probes.iter().all(|p| p.active_potential_margin >= -tol)
    }

    /// Sweep has the smallest energy norm.
    pub fn norm_minimal(&self, tol: f64) -> bool {
        self.probes.iter().all(|p| self.swept_norm <= p.norm + tol)
    }

    /// Probes built by addition or convex combination have the predicted mass.
    pub fn masses_as_constructed(&self, rel_tol: f64) -> bool {
        self.probes
            .iter()
            .all(|p| (p.mass - p.expected_mass).abs() <= rel_tol * p.expected_mass.max(1e-300))
    }
}

/// Builds random members of the dominating class (the sweep plus positive
/// bumps, and convex combinations of `omega` and its sweep) and compares them
/// with the sweep in mass, potential and energy norm.
#[allow(clippy::too_many_arguments)]
pub fn minimum_mass_check(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    region: &RegionMask,
    n_probes: usize,
    seed: u64,
    mode: SweepMode,
    opts: &SolverOptions,
) -> Result<MinimumMassReport> {
    let sweep = inner_balayage(m, omega, region, mode, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.len();
    let omega_mass = total_mass(omega);
    let bump_scale = if omega_mass > 0.0 { omega_mass / n as f64 } else { 1.0 };
    let region_idx = region.indices();
    let swept_norm = dot(sweep.swept.weights(), &sweep.swept_potential).max(0.0).sqrt();

    let record = |kind: ProbeKind, weights: Vec<f64>, expected_mass: f64| -> Result<ProbeRecord> {
        let nu = DiscreteMeasure::new(m.nodes().clone(), weights)?;
        let u = m.apply(nu.weights());
        let class_margin = region_idx
            .iter()
            .map(|&i| u[i] - sweep.source_potential[i])
            .fold(f64::INFINITY, f64::min);
        let active_potential_margin = sweep
            .active_nodes
            .iter()
            .map(|&i| u[i] - sweep.swept_potential[i])
            .fold(f64::INFINITY, f64::min);
        Ok(ProbeRecord {
            kind,
            mass: total_mass(&nu),
            expected_mass,
            norm: dot(nu.weights(), &u).max(0.0).sqrt(),
            class_margin,
            active_potential_margin,
        })
    };

    let mut probes = vec![record(ProbeKind::Swept, sweep.swept.weights().to_vec(), sweep.mass)?];
    for k in 0..n_probes {
        if k % 2 == 0 {
            let size = rng.gen_range(1..=n.div_ceil(4).max(1));
            let mut w = sweep.swept.weights().to_vec();
            let mut added = 0.0;
            for i in sample(&mut rng, n, size) {
                let b = bump_scale * (1.0 - rng.gen::<f64>());
                w[i] += b;
                added += b;
            }
            probes.push(record(ProbeKind::Bump, w, sweep.mass + added)?);
        } else {
            let a: f64 = rng.gen();
            let w = omega
                .weights()
                .iter()
                .zip(sweep.swept.weights())
                .map(|(o, s)| a * o + (1.0 - a) * s)
                .collect();
            probes.push(record(
                ProbeKind::Convex { a },
                w,
                a * omega_mass + (1.0 - a) * sweep.mass,
            )?);
        }
    }
    Ok(MinimumMassReport {
        swept_mass: sweep.mass,
        swept_norm,
        probes,
        potential_scale: sweep.potential_scale(),
    })
}

/// `nu(X) - mu(X)` when `U^mu <= U^nu + tol` at every node, `None` otherwise.
pub fn positivity_of_mass(
    m: &KernelMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<Option<f64>> {
    if !m.same_nodes(mu.nodes()) || !m.same_nodes(nu.nodes()) {
        return Err(Error::NodeSetMismatch);
    }
    let umu = m.apply(mu.weights());
    let unu = m.apply(nu.weights());
    let dominated = umu.iter().zip(&unu).all(|(a, b)| *a <= b + tol);
    Ok(dominated.then(|| total_mass(nu) - total_mass(mu)))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use approx::assert_relative_eq;

    use super::*;
    use crate::kernels::{assemble_matrix, KernelSpec, NodeSet};

    fn setup() -> (KernelMatrix, DiscreteMeasure) {
        let nodes = Arc::new(
            NodeSet::from_points(vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![3.0, 3.0, 0.0],
            ])
            .unwrap(),
        );
        let m = assemble_matrix(&KernelSpec::new(3, 2.0, 0.2).unwrap(), nodes.clone()).unwrap();
        let omega = DiscreteMeasure::point_mass(nodes, 3, 1.0).unwrap();
        (m, omega)
    }

    #[test]
    fn rest_with_equal_regions() {
        let (m, omega) = setup();
        let a = RegionMask::from_indices(m.nodes().clone(), &[0, 1, 2]).unwrap();
        let r = balayage_with_rest(&m, &omega, &a, &a, SweepMode::GaussCapped, &SolverOptions::default())
            .unwrap();
        assert!(r.strong_distance <= 2e-9);
        let q = RegionMask::from_indices(m.nodes().clone(), &[3]).unwrap();
        assert!(balayage_with_rest(&m, &omega, &a, &q, SweepMode::GaussCapped, &SolverOptions::default())
            .is_err());
    }

    #[test]
    fn rest_onto_single_node() {
        let (m, omega) = setup();
        let a = RegionMask::from_indices(m.nodes().clone(), &[0, 1, 2]).unwrap();
        let q = RegionMask::from_indices(m.nodes().clone(), &[1]).unwrap();
        let r = balayage_with_rest(&m, &omega, &a, &q, SweepMode::GaussCapped, &SolverOptions::default())
            .unwrap();
        // both routes reduce to U(x_1) / k(x_1, x_1)
        let direct = m.get(1, 3) / m.get(1, 1);
        let iterated = r.outer.swept_potential[1] / m.get(1, 1);
        assert_relative_eq!(r.direct.swept.weights()[1], direct, max_relative = 1e-12);
        assert_relative_eq!(r.iterated.swept.weights()[1], iterated, max_relative = 1e-12);
        assert!(r.strong_distance < 1e-9);
    }

    #[test]
    fn mass_formula_single_node() {
        let (m, omega) = setup();
        let region = RegionMask::from_indices(m.nodes().clone(), &[0]).unwrap();
        let r = mass_formula_check(&m, &omega, &region, SweepMode::GaussCapped, &SolverOptions::default())
            .unwrap();
        assert_relative_eq!(r.lhs, m.get(0, 3) / m.get(0, 0), max_relative = 1e-12);
        assert_relative_eq!(r.rhs, m.get(0, 3) / m.get(0, 0), max_relative = 1e-12);
    }

    #[test]
    fn probes_include_the_sweep() {
        let (m, omega) = setup();
        let region = RegionMask::from_indices(m.nodes().clone(), &[0, 1, 2]).unwrap();
        let r = minimum_mass_check(&m, &omega, &region, 6, 3, SweepMode::GaussCapped, &SolverOptions::default())
            .unwrap();
        assert_eq!(r.probes.len(), 7);
        assert_eq!(r.probes[0].mass, r.swept_mass);
        assert!(r.probes[1].mass > r.swept_mass);
        assert!(r.mass_minimal(1e-12));
        assert!(r.masses_as_constructed(1e-12));
    }
}
