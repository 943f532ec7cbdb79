#![allow(dead_code)]

use std::sync::Arc;

use balayage::geometry::random_cloud;
use balayage::kernels::{assemble_matrix, KernelMatrix, KernelSpec};
use balayage::measures::{DiscreteMeasure, RegionMask};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Scenario {
    pub seed: u64,
    pub matrix: KernelMatrix,
    pub omega: DiscreteMeasure,
    pub region: RegionMask,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random cloud in the unit cube with a random Riesz order, default
/// regularization, a half-space or ball region, and a few point masses
/// outside it (sometimes one inside as well).
pub fn random_scenario(seed: u64, min_nodes: usize, max_nodes: usize) -> Scenario {
    random_scenario_with_region(seed, min_nodes, max_nodes, 2)
}

/// As [`random_scenario`], redrawing until the region has `min_region` nodes.
pub fn random_scenario_with_region(
    seed: u64,
    min_nodes: usize,
    max_nodes: usize,
    min_region: usize,
) -> Scenario {
    let mut r = rng(seed);
    loop {
        let n = r.gen_range(min_nodes..=max_nodes);
        let nodes = Arc::new(random_cloud(n, &[0.0; 3], &[1.0; 3], r.gen()).unwrap());
        let alpha = [2.0, 1.5, 1.0][r.gen_range(0..3)];
        let spec = KernelSpec::new(3, alpha, 1.0)
            .unwrap()
            .with_auto_regularization(&nodes)
            .unwrap();
        let region = if r.gen_bool(0.5) {
            let t = r.gen_range(0.3..0.7);
            RegionMask::from_predicate(nodes.clone(), |x| x[0] < t)
        } else {
            let c: Vec<f64> = (0..3).map(|_| r.gen_range(0.3..0.7)).collect();
            let rad = r.gen_range(0.3..0.5);
            RegionMask::from_predicate(nodes.clone(), |x| {
                x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < rad * rad
            })
        };
        let outside: Vec<usize> = (0..n).filter(|&i| !region.contains(i)).collect();
        if region.count() < min_region || outside.is_empty() {
            continue;
        }
        let mut w = vec![0.0; n];
        let k = r.gen_range(1..=outside.len().min(3));
        for j in sample(&mut r, outside.len(), k) {
            w[outside[j]] = 1.0 - r.gen::<f64>();
        }
        if r.gen_bool(1.0 / 3.0) {
            let inside = region.indices();
            w[inside[r.gen_range(0..inside.len())]] = 1.0 - r.gen::<f64>();
        }
        let matrix = assemble_matrix(&spec, nodes.clone()).unwrap();
        let omega = DiscreteMeasure::new(nodes, w).unwrap();
        return Scenario {
            seed,
            matrix,
            omega,
            region,
        };
    }
}
