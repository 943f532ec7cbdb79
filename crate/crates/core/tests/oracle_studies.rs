use std::sync::Arc;

use balayage::balayage::{
    equilibrium_measure, exhaust_and_sweep, mass_formula_check, SweepMode,
};
use balayage::energy::potential;
use balayage::geometry::{grid, sphere_shell};
use balayage::kernels::{assemble_matrix, KernelSpec};
use balayage::measures::{build_exhaustion, ExhaustionStrategy, RegionMask};
use balayage::oracles::{
    ball_equilibrium_potential, ball_swept_mass, refinement_oracle, BallRefinement, BallScenario,
    EpsilonRefinement, RefinementScenario,
};
use balayage::solvers::SolverOptions;

#[test]
fn shell_equilibrium_potential_off_nodes() {
    let s = BallScenario::unit(2.0).unwrap();
    let nodes = Arc::new(sphere_shell(&[0.0; 3], 1.0, 1000).unwrap());
    let spec = KernelSpec::newtonian(1.0).unwrap().with_auto_regularization(&nodes).unwrap();
    let m = assemble_matrix(&spec, nodes.clone()).unwrap();
    let eq = equilibrium_measure(&m, &RegionMask::full(nodes), &SolverOptions::default()).unwrap();
    let probes: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0, 0.0],
        vec![0.3, -0.2, 0.1],
        vec![0.0, 0.5, 0.0],
        vec![1.5, 0.0, 0.0],
        vec![0.0, -2.0, 0.0],
        vec![2.0, 2.0, 1.0],
        vec![0.0, 0.0, 4.0],
    ];
    let u = potential(&m, &eq.gamma, Some(&probes)).unwrap().values;
    for (x, v) in probes.iter().zip(&u) {
        let exact = ball_equilibrium_potential(&s, x).unwrap();
        assert!((v - exact).abs() <= 0.03 * exact, "{x:?}: {v} vs {exact}");
    }
    assert!((eq.capacity - 1.0).abs() <= 0.03, "capacity {}", eq.capacity);
}

#[test]
fn domination_defect_under_shrinking_regularization() {
    let nodes = Arc::new(grid(&[0.0; 3], &[1.0; 3], &[5, 5, 5]).unwrap());
    let source = nodes.find(&[1.0, 0.5, 0.5]).unwrap();
    let mut w = vec![0.0; nodes.len()];
    w[source] = 1.0;
    let region: Vec<bool> = nodes.points().map(|x| x[0] <= 0.5).collect();
    let scenario = EpsilonRefinement {
        kernel: KernelSpec::newtonian(1.0).unwrap(),
        nodes,
        omega_weights: w,
        region,
        base_epsilon: 0.125,
    };
    let levels = refinement_oracle(&scenario, 4, SweepMode::GaussCapped, &SolverOptions::default()).unwrap();
    // the coarsest regularization breaks domination on this grid
    assert!(levels[0].domination_defect > 0.05);
    for l in &levels[1..] {
        assert!(l.domination_defect <= 1e-12, "eps {}: {}", l.epsilon, l.domination_defect);
        assert!(l.result.as_ref().unwrap().potential_on_a_max_gap <= 1e-7);
    }
}

#[test]
fn mass_formula_on_a_shell() {
    let r = BallRefinement::new(BallScenario::unit(2.0).unwrap(), 512).unwrap();
    let p = r.build(0).unwrap();
    assert!(p.matrix.len() > 500);
    let report =
        mass_formula_check(&p.matrix, &p.omega, &p.region, SweepMode::GaussCapped, &SolverOptions::default()).unwrap();
    let exact = ball_swept_mass(&r.scenario).unwrap();
    assert!(report.gap <= 0.01 * report.lhs);
    assert!((report.lhs - exact).abs() <= 0.05 * exact);
}

#[test]
fn radial_exhaustion_of_a_shell() {
    let r = BallRefinement::new(BallScenario::unit(2.0).unwrap(), 300).unwrap();
    let p = r.build(0).unwrap();
    let ex = build_exhaustion(&p.region, 5, ExhaustionStrategy::Radial).unwrap();
    let report = exhaust_and_sweep(&p.matrix, &p.omega, &ex, SweepMode::GaussCapped, &SolverOptions::default()).unwrap();
    assert_eq!(report.stages.len(), 5);
    for w in report.stages.windows(2) {
        assert!(w[0].mass <= w[1].mass + 1e-12);
        assert!(w[0].size < w[1].size);
    }
    assert!(report.potential_monotonicity_defect <= 1e-9);
    assert!(report.equilibrium_monotonicity_defect <= 1e-9);
    assert!(report.distance_monotonicity_defect <= 1e-9);
    assert_eq!(report.distances_to_final[4], 0.0);
}
