//! Potentials, mutual energies, and the Gauss functional.
//!
//! Every quantity here is a bilinear or quadratic form in the shared
//! [`KernelMatrix`]; measures living on a different node set are rejected.

use crate::error::{Error, Result};
use crate::kernels::{dist2, KernelMatrix};
use crate::measures::{DiscreteMeasure, SignedDiscreteMeasure};

/// Potential values, either at the nodes or at explicit evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub at_nodes: bool,
}

fn check(m: &KernelMatrix, mu: &DiscreteMeasure) -> Result<()> {
    if m.same_nodes(mu.nodes()) {
        Ok(())
    } else {
        Err(Error::NodeSetMismatch)
    }
}

/// `U^mu` at the nodes of `m`, or at the given off-node points.
pub fn potential(
    m: &KernelMatrix,
    mu: &DiscreteMeasure,
    at: Option<&[Vec<f64>]>,
) -> Result<PotentialField> {
    check(m, mu)?;
    match at {
        None => Ok(PotentialField {
            values: m.apply(mu.weights()),
            at_nodes: true,
        }),
        Some(points) => {
            let nodes = m.nodes();
            let spec = m.spec();
            let mut values = Vec::with_capacity(points.len());
            for p in points {
                if p.len() != spec.dimension() {
                    return Err(Error::Parameter(format!(
                        "evaluation point has dimension {}, kernel has {}",
                        p.len(),
                        spec.dimension()
                    )));
                }
                let mut u = 0.0;
                for (j, &w) in mu.weights().iter().enumerate() {
                    if w != 0.0 {
                        u += w * spec.profile(dist2(p, nodes.point(j)));
                    }
                }
                values.push(u);
            }
            Ok(PotentialField {
                values,
                at_nodes: false,
            })
        }
    }
}

/// `a^T M b` for raw (possibly signed) weight vectors.
pub fn energy_form(m: &KernelMatrix, a: &[f64], b: &[f64]) -> f64 {
    dot(a, &m.apply(b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `I(mu, nu)`.
pub fn mutual_energy(m: &KernelMatrix, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check(m, mu)?;
    check(m, nu)?;
    Ok(energy_form(m, mu.weights(), nu.weights()))
}

/// `I(xi, theta)` for signed measures, by bilinearity.
pub fn mutual_energy_signed(
    m: &KernelMatrix,
    xi: &SignedDiscreteMeasure,
    theta: &SignedDiscreteMeasure,
) -> Result<f64> {
    check(m, xi.positive())?;
    check(m, theta.positive())?;
    Ok(energy_form(m, &xi.signed_weights(), &theta.signed_weights()))
}

/// `sqrt(I(mu))`.
pub fn energy_norm(m: &KernelMatrix, mu: &DiscreteMeasure) -> Result<f64> {
    Ok(mutual_energy(m, mu, mu)?.max(0.0).sqrt())
}

/// Energy-norm distance `||mu - nu||`.
pub fn strong_distance(m: &KernelMatrix, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check(m, mu)?;
    check(m, nu)?;
    Ok(weight_distance(m, mu.weights(), nu.weights()))
}

pub(crate) fn weight_distance(m: &KernelMatrix, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    energy_form(m, &d, &d).max(0.0).sqrt()
}

/// `I_f(mu) = ||mu||^2 - 2 * integral of U^omega d mu`, the external field being `-U^omega`.
pub fn gauss_functional(m: &KernelMatrix, mu: &DiscreteMeasure, omega: &DiscreteMeasure) -> Result<f64> {
    check(m, mu)?;
    check(m, omega)?;
    let mw = m.apply(mu.weights());
    let self_energy = dot(mu.weights(), &mw);
    let cross = dot(omega.weights(), &mw);
    Ok(self_energy - 2.0 * cross)
}

/// `|I(omega^A, lambda) - I(lambda^A, omega)|`.
pub fn symmetry_residual(
    m: &KernelMatrix,
    omega_swept: &DiscreteMeasure,
    omega: &DiscreteMeasure,
    lambda: &DiscreteMeasure,
    lambda_swept: &DiscreteMeasure,
) -> Result<f64> {
    let lhs = mutual_energy(m, omega_swept, lambda)?;
    let rhs = mutual_energy(m, lambda_swept, omega)?;
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use approx::assert_relative_eq;

    use super::*;
    use crate::kernels::{assemble_matrix, KernelSpec, NodeSet};

    fn two_nodes(d: f64) -> KernelMatrix {
        let nodes = Arc::new(
            NodeSet::from_points(vec![vec![0.0, 0.0, 0.0], vec![d, 0.0, 0.0]]).unwrap(),
        );
        assemble_matrix(&KernelSpec::new(3, 2.0, 0.5).unwrap(), nodes).unwrap()
    }

    #[test]
    fn unit_mass_self_potential() {
        let m = two_nodes(2.0);
        let mu = DiscreteMeasure::point_mass(m.nodes().clone(), 0, 1.0).unwrap();
        let u = potential(&m, &mu, None).unwrap();
        assert_eq!(u.values[0], 2.0);
        assert_eq!(mutual_energy(&m, &mu, &mu).unwrap(), 2.0);
        let zero = DiscreteMeasure::zero(m.nodes().clone());
        assert!(potential(&m, &zero, None).unwrap().values.iter().all(|v| *v == 0.0));
        assert_eq!(mutual_energy(&m, &mu, &zero).unwrap(), 0.0);
        assert_eq!(energy_norm(&m, &zero).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_potential() {
        let m = two_nodes(2.0);
        let mu = DiscreteMeasure::new(m.nodes().clone(), vec![1.0, 1.0]).unwrap();
        let u = potential(&m, &mu, Some(&[vec![1.0, 0.0, 0.0]])).unwrap();
        let k = m.spec().profile(1.0);
        assert_relative_eq!(u.values[0], 2.0 * k, max_relative = 1e-15);
        assert!(!u.at_nodes);
    }

    #[test]
    fn gauss_functional_examples() {
        let m = two_nodes(1.5);
        let omega = DiscreteMeasure::new(m.nodes().clone(), vec![0.3, 0.7]).unwrap();
        let zero = DiscreteMeasure::zero(m.nodes().clone());
        assert_eq!(gauss_functional(&m, &zero, &omega).unwrap(), 0.0);
        let e = mutual_energy(&m, &omega, &omega).unwrap();
        assert_relative_eq!(gauss_functional(&m, &omega, &omega).unwrap(), -e, max_relative = 1e-14);
    }

    #[test]
    fn mismatched_nodes_rejected() {
        let m = two_nodes(2.0);
        let other = two_nodes(3.0);
        let mu = DiscreteMeasure::point_mass(other.nodes().clone(), 0, 1.0).unwrap();
        assert!(matches!(potential(&m, &mu, None), Err(Error::NodeSetMismatch)));
        assert!(matches!(energy_norm(&m, &mu), Err(Error::NodeSetMismatch)));
    }

    #[test]
    fn symmetry_residual_trivial_cases() {
        let m = two_nodes(2.0);
        let omega = DiscreteMeasure::new(m.nodes().clone(), vec![0.3, 0.7]).unwrap();
        let swept = DiscreteMeasure::new(m.nodes().clone(), vec![0.1, 0.2]).unwrap();
        // lambda = omega and lambda^A = omega^A: both sides are I(omega^A, omega)
        assert_eq!(symmetry_residual(&m, &swept, &omega, &omega, &swept).unwrap(), 0.0);
        // full target: sweeps are identities
        let lambda = DiscreteMeasure::new(m.nodes().clone(), vec![2.0, 0.5]).unwrap();
        let r = symmetry_residual(&m, &omega, &omega, &lambda, &lambda).unwrap();
        assert!(r <= 1e-15);
    }
}
