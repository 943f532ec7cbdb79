use std::sync::Arc;

use balayage::balayage::{inner_balayage, SweepMode};
use balayage::geometry::random_cloud_points;
use balayage::kernels::{assemble_matrix, KernelMatrix, KernelSpec, NodeSet};
use balayage::measures::{DiscreteMeasure, RegionMask};
use balayage::solvers::{
    brute_force_active_set, kkt_residuals, projection_onto_cone, solve_nnqp, solve_nnqp_from,
    NnqpProblem, SolverOptions, BRUTE_FORCE_MAX,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn kernel_matrix(m: usize, alpha: f64, seed: u64) -> KernelMatrix {
    let nodes = Arc::new(NodeSet::from_points(random_cloud_points(m, &[0.0; 3], &[1.0; 3], seed)).unwrap());
    let spec = KernelSpec::new(3, alpha, 0.1).unwrap();
    let spec = if m > 1 { spec.with_auto_regularization(&nodes).unwrap() } else { spec };
    assemble_matrix(&spec, nodes).unwrap()
}

fn instance() -> impl Strategy<Value = (KernelMatrix, Vec<f64>)> {
    (1usize..=12, prop::sample::select(vec![2.0, 1.5, 1.0, 0.5]), any::<u64>()).prop_flat_map(
        |(m, alpha, seed)| {
            let km = kernel_matrix(m, alpha, seed);
            (Just(km), prop::collection::vec(-1.0f64..2.0, m))
        },
    )
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force((km, b) in instance(), frac in 0.2f64..1.5, capped in any::<bool>()) {
        let free = NnqpProblem::new(km.entries().clone(), DVector::from_vec(b.clone()), None).unwrap();
        let free_mass: f64 = brute_force_active_set(&free).unwrap().iter().sum();
        let cap = (capped && free_mass > 0.0).then_some(frac * free_mass);
        let p = NnqpProblem::new(km.entries().clone(), DVector::from_vec(b), cap).unwrap();
        let exact = brute_force_active_set(&p).unwrap();
        let s = solve_nnqp(&p, &SolverOptions::default()).unwrap();
        prop_assert!((p.objective(&s.weights) - p.objective(&exact)).abs() <= 1e-8);
        prop_assert!(max_abs_diff(&s.weights, &exact) <= 1e-6);
        prop_assert!(s.weights.iter().all(|w| *w >= 0.0));
        if let Some(h) = cap {
            prop_assert!(s.mass() <= h * (1.0 + 1e-12));
        }
    }

    #[test]
    fn kkt_report_is_reproducible((km, b) in instance()) {
        let p = NnqpProblem::new(km.entries().clone(), DVector::from_vec(b), None).unwrap();
        let s = solve_nnqp(&p, &SolverOptions::default()).unwrap();
        let mut again = kkt_residuals(&p, &s.weights, s.multiplier, SolverOptions::default().tol);
        again.iterations = s.report.iterations;
        prop_assert_eq!(&again, &s.report);
        prop_assert!(again.stationarity_residual >= 0.0);
        prop_assert!(again.complementarity_residual >= 0.0);
        prop_assert!(again.feasibility_violation >= 0.0);
    }

    #[test]
    fn objective_never_increases((km, b) in instance(), capped in any::<bool>()) {
        let cap = if capped { Some(0.5) } else { None };
        let p = NnqpProblem::new(km.entries().clone(), DVector::from_vec(b), cap).unwrap();
        let s = solve_nnqp(&p, &SolverOptions::default()).unwrap();
        for w in s.objective_history.windows(2) {
            // rounding slack only
            prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn unique_from_any_start((km, b) in instance(), start_seed in any::<u64>(), capped in any::<bool>()) {
        let m = b.len();
        let cap = if capped { Some(0.5) } else { None };
        let p = NnqpProblem::new(km.entries().clone(), DVector::from_vec(b), cap).unwrap();
        let opts = SolverOptions::default();
        let a = solve_nnqp(&p, &opts).unwrap();
        let start: Vec<f64> = random_cloud_points(m, &[0.0], &[3.0], start_seed).into_iter().map(|v| v[0]).collect();
        let c = solve_nnqp_from(&p, &start, &opts).unwrap();
        prop_assert!(max_abs_diff(&a.weights, &c.weights) <= 10.0 * opts.tol);
    }

    #[test]
    fn loose_cap_is_inactive((km, b) in instance()) {
        let free = NnqpProblem::new(km.entries().clone(), DVector::from_vec(b.clone()), None).unwrap();
        let s_free = solve_nnqp(&free, &SolverOptions::default()).unwrap();
        let p = NnqpProblem::new(km.entries().clone(), DVector::from_vec(b), Some(s_free.mass() + 1.0)).unwrap();
        let s = solve_nnqp(&p, &SolverOptions::default()).unwrap();
        prop_assert_eq!(s.multiplier, 0.0);
        prop_assert_eq!(s.weights, s_free.weights);
    }

    #[test]
    fn projection_matches_uncapped_gauss(m in 2usize..=30, seed in any::<u64>(), split in 0.2f64..0.8) {
        let km = kernel_matrix(m, 2.0, seed);
        let nodes = km.nodes().clone();
        let region = RegionMask::from_predicate(nodes.clone(), |x| x[0] < split);
        prop_assume!(!region.is_empty());
        let w: Vec<f64> = (0..m).map(|i| if region.contains(i) { 0.0 } else { 1.0 / m as f64 }).collect();
        let omega = DiscreteMeasure::new(nodes, w.clone()).unwrap();
        prop_assume!(!omega.is_zero());
        let opts = SolverOptions::default();
        let proj = projection_onto_cone(&km, &omega, &region, &opts).unwrap();
        let idx = region.indices();
        let u = km.apply(&w);
        let b: Vec<f64> = idx.iter().map(|&i| u[i]).collect();
        let p = NnqpProblem::from_kernel(&km, &idx, b, None).unwrap();
        let gauss = solve_nnqp(&p, &opts).unwrap();
        prop_assert!(max_abs_diff(&proj.weights, &gauss.weights) <= 10.0 * opts.tol);

        // ||mu - omega||^2 = I_f(mu) + ||omega||^2 with I_f = 2 * objective
        let mut full = vec![0.0; km.len()];
        for (&i, &v) in idx.iter().zip(&gauss.weights) {
            full[i] = v;
        }
        let d: Vec<f64> = full.iter().zip(&w).map(|(a, b)| a - b).collect();
        let lhs = balayage::energy::energy_form(&km, &d, &d);
        let rhs = 2.0 * p.objective(&gauss.weights) + balayage::energy::energy_form(&km, &w, &w);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }
}

#[test]
fn brute_force_refuses_large_problems() {
    let m = BRUTE_FORCE_MAX + 1;
    let p = NnqpProblem::new(DMatrix::identity(m, m), DVector::from_element(m, 1.0), None).unwrap();
    assert!(brute_force_active_set(&p).is_err());
}

#[test]
fn brute_force_small_cases() {
    let p = NnqpProblem::new(DMatrix::from_row_slice(1, 1, &[4.0]), DVector::from_vec(vec![2.0]), None).unwrap();
    assert_eq!(brute_force_active_set(&p).unwrap(), vec![0.5]);
    let p = NnqpProblem::new(
        DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]),
        DVector::from_vec(vec![2.0, -2.0]),
        None,
    )
    .unwrap();
    assert_eq!(brute_force_active_set(&p).unwrap(), vec![1.0, 0.0]);
}

#[test]
fn ten_node_equilibrium_brute_force_is_no_worse() {
    let km = kernel_matrix(10, 2.0, 99);
    let p = NnqpProblem::new(km.entries().clone(), DVector::from_element(10, 1.0), None).unwrap();
    let exact = brute_force_active_set(&p).unwrap();
    let s = solve_nnqp(&p, &SolverOptions::default()).unwrap();
    assert!(p.objective(&exact) <= p.objective(&s.weights) + 1e-10);
}

#[test]
fn projection_keeps_measures_on_the_region() {
    let km = kernel_matrix(8, 1.5, 5);
    let region = RegionMask::from_indices(km.nodes().clone(), &[0, 1, 2, 3, 4]).unwrap();
    let omega = DiscreteMeasure::new(km.nodes().clone(), vec![0.3, 0.0, 1.2, 0.0, 0.7, 0.0, 0.0, 0.0]).unwrap();
    let r = inner_balayage(&km, &omega, &region, SweepMode::Projection, &SolverOptions::default()).unwrap();
    assert!(max_abs_diff(r.swept.weights(), omega.weights()) <= 1e-9);
}
