use std::sync::Arc;

use balayage::energy::{energy_form, mutual_energy_signed};
use balayage::geometry::random_cloud_points;
use balayage::kernels::{assemble_matrix, eval_kernel, KernelSpec, NodeSet};
use balayage::measures::{
    build_exhaustion, hahn_jordan_normalize, ExhaustionStrategy, RegionMask, SignedDiscreteMeasure,
};
use proptest::prelude::*;

fn order() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![2.0, 1.75, 1.5, 1.0, 0.5, 0.25])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_symmetric_and_positive_definite(
        m in 2usize..=40,
        seed in any::<u64>(),
        alpha in order(),
        eps in 0.01f64..1.0,
    ) {
        let pts = random_cloud_points(m, &[0.0; 3], &[1.0; 3], seed);
        let nodes = Arc::new(NodeSet::from_points(pts).unwrap());
        let km = assemble_matrix(&KernelSpec::new(3, alpha, eps).unwrap(), nodes).unwrap();
        let e = km.entries();
        for i in 0..m {
            for j in 0..m {
                prop_assert_eq!(e[(i, j)].to_bits(), e[(j, i)].to_bits());
            }
        }
        let pd = km.check_positive_definite(0.0).unwrap();
        prop_assert!(pd.pass, "min eigenvalue {}", pd.min_eigenvalue);
    }

    #[test]
    fn kernel_symmetric_and_radially_decreasing(
        x in prop::array::uniform3(-2.0f64..2.0),
        y in prop::array::uniform3(-2.0f64..2.0),
        t in 1.0f64..3.0,
        alpha in order(),
        eps in 0.01f64..1.0,
    ) {
        let spec = KernelSpec::new(3, alpha, eps).unwrap();
        let a = eval_kernel(&spec, &x, &y).unwrap();
        let b = eval_kernel(&spec, &y, &x).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let far: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| xi + t * (yi - xi)).collect();
        let c = eval_kernel(&spec, &x, &far).unwrap();
        prop_assert!(c <= a);
    }

    #[test]
    fn signed_energy_is_positive(
        m in 2usize..=30,
        seed in any::<u64>(),
        alpha in order(),
        signed in prop::collection::vec(-1.0f64..1.0, 30),
    ) {
        let pts = random_cloud_points(m, &[0.0; 3], &[1.0; 3], seed);
        let nodes = Arc::new(NodeSet::from_points(pts).unwrap());
        let spec = KernelSpec::new(3, alpha, 1.0).unwrap().with_auto_regularization(&nodes).unwrap();
        let km = assemble_matrix(&spec, nodes.clone()).unwrap();
        let v = &signed[..m];
        let xi = SignedDiscreteMeasure::from_signed(nodes, v).unwrap();
        let e = mutual_energy_signed(&km, &xi, &xi).unwrap();
        let scale = energy_form(&km, &v.iter().map(|a| a.abs()).collect::<Vec<_>>(), &v.iter().map(|a| a.abs()).collect::<Vec<_>>());
        prop_assert!(e >= -1e-12 * scale);
    }

    #[test]
    fn hahn_jordan_is_exact(
        pos in prop::collection::vec(0.0f64..2.0, 12),
        neg in prop::collection::vec(0.0f64..2.0, 12),
    ) {
        let pts = random_cloud_points(12, &[0.0; 2], &[1.0; 2], 1);
        let nodes = Arc::new(NodeSet::from_points(pts).unwrap());
        let xi = SignedDiscreteMeasure::new(
            balayage::measures::DiscreteMeasure::new(nodes.clone(), pos).unwrap(),
            balayage::measures::DiscreteMeasure::new(nodes, neg).unwrap(),
        ).unwrap();
        let hj = hahn_jordan_normalize(&xi);
        prop_assert!(hj.has_disjoint_parts());
        // `+ 0.0` folds -0.0 into 0.0
        let bits = |m: &SignedDiscreteMeasure| -> Vec<u64> {
            m.signed_weights().iter().map(|v| (v + 0.0).to_bits()).collect()
        };
        prop_assert_eq!(bits(&xi), bits(&hj));
    }

    #[test]
    fn exhaustions_are_nested(m in 2usize..=60, stages in 1usize..=8, seed in any::<u64>(), radial in any::<bool>()) {
        let pts = random_cloud_points(m, &[0.0; 3], &[1.0; 3], seed);
        let nodes = Arc::new(NodeSet::from_points(pts).unwrap());
        let target = RegionMask::from_predicate(nodes, |x| x[1] < 0.6);
        prop_assume!(!target.is_empty());
        let strategy = if radial { ExhaustionStrategy::Radial } else { ExhaustionStrategy::RandomNested { seed } };
        let ex = build_exhaustion(&target, stages, strategy).unwrap();
        prop_assert!(ex.len() <= stages);
        prop_assert_eq!(ex.len(), stages.min(target.count()));
        for w in ex.stages().windows(2) {
            prop_assert!(w[0].is_subset_of(&w[1]));
            prop_assert!(w[0].count() < w[1].count());
        }
        prop_assert_eq!(ex.target().flags(), target.flags());
    }
}
