//! Orthogonal projection onto the cone of measures carried by a region.
//!
//! With `M = L L'`, the energy distance is `||mu - omega||^2 = |L'(w_mu - w_omega)|^2`,
//! so the projection is a non-negative least-squares problem in the columns of
//! `L'` selected by the region. It is solved here by Lawson-Hanson, a route that
//! shares nothing with [`super::solve_nnqp`] beyond the kernel matrix.

use nalgebra::{DMatrix, DVector};

use super::{kkt_residuals, NnqpProblem, NnqpSolution, SolverOptions};
use crate::error::{BestIterate, Error, Result};
use crate::kernels::KernelMatrix;
use crate::measures::{DiscreteMeasure, RegionMask};

/// Weights on `region.indices()` of the nearest measure (in energy norm) to
/// `omega` among those carried by the region.
pub fn projection_onto_cone(
    m: &KernelMatrix,
    omega: &DiscreteMeasure,
    region: &RegionMask,
    opts: &SolverOptions,
) -> Result<NnqpSolution> {
    opts.validate()?;
    if !m.same_nodes(omega.nodes()) || !m.same_nodes(region.nodes()) {
        return Err(Error::NodeSetMismatch);
    }
    region.require_nonempty()?;
    let idx = region.indices();
    let b: Vec<f64> = {
        let u = m.apply(omega.weights());
        idx.iter().map(|&i| u[i]).collect()
    };
    let problem = NnqpProblem::from_kernel(m, &idx, b, None)?;

    let chol = m
        .entries()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("kernel matrix is not positive definite".into()))?;
    let lt = chol.l().transpose();
    let a = lt.select_columns(idx.iter());
    let y = &lt * DVector::from_column_slice(omega.weights());

    let abs_tol = opts.tol * problem.scale();
    let lh = lawson_hanson(&a, &y, 0.1 * abs_tol, opts.iteration_cap(idx.len()))?;
    let mut report = kkt_residuals(&problem, &lh.x, 0.0, opts.tol);
    report.iterations = lh.iterations;
    let mass: f64 = lh.x.iter().sum();
    if report.converged(mass) {
        Ok(NnqpSolution {
            weights: lh.x,
            multiplier: 0.0,
            report,
            objective_history: lh.history,
        })
    } else {
        Err(Error::Convergence {
            iterations: lh.iterations,
            residual: report.stationarity_residual,
            best: Box::new(BestIterate {
                weights: lh.x,
                multiplier: 0.0,
                report,
            }),
        })
    }
}

struct LhOutput {
    x: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
}

fn least_squares(a: &DMatrix<f64>, passive: &[usize], y: &DVector<f64>) -> Result<Vec<f64>> {
    let sub = a.select_columns(passive.iter());
    let qr = sub.qr();
    let qty = qr.q().transpose() * y;
    let s = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Solver("rank-deficient column set".into()))?;
    Ok(s.as_slice().to_vec())
}

/// `min |A x - y|^2` subject to `x >= 0`.
fn lawson_hanson(a: &DMatrix<f64>, y: &DVector<f64>, dual_tol: f64, max_iter: usize) -> Result<LhOutput> {
    let m = a.ncols();
    let half_yy = 0.5 * y.dot(y);
    let objective = |x: &[f64]| {
        let r = a * DVector::from_column_slice(x) - y;
        0.5 * r.dot(&r) - half_yy
    };
    let mut x = vec![0.0; m];
    let mut passive = vec![false; m];
    let mut history = vec![0.0];
    let mut skip: Option<usize> = None;
    let mut iterations = 0;
    loop {
        let resid = y - a * DVector::from_column_slice(&x);
        let dual = a.transpose() * resid;
        let candidate = (0..m)
            .filter(|&j| !passive[j] && Some(j) != skip)
            .map(|j| (j, dual[j]))
            .max_by(|p, q| p.1.total_cmp(&q.1));
        let Some((j, dj)) = candidate else { break };
        if dj <= dual_tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Convergence {
                iterations,
                residual: dj,
                best: Box::new(BestIterate {
                    weights: x,
                    multiplier: 0.0,
                    report: Default::default(),
                }),
            });
        }
        iterations += 1;
        passive[j] = true;
        let x_before = x.clone();
        loop {
            let p_idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
            let s = least_squares(a, &p_idx, y)?;
            let blocking = p_idx
                .iter()
                .zip(&s)
                .filter(|(_, si)| **si <= 0.0)
                .map(|(&i, &si)| (i, x[i] / (x[i] - si)))
                .min_by(|p, q| p.1.total_cmp(&q.1));
            match blocking {
                None => {
                    x.iter_mut().for_each(|v| *v = 0.0);
                    for (&i, &si) in p_idx.iter().zip(&s) {
                        x[i] = si;
                    }
                    break;
                }
                Some((bi, alpha)) => {
                    for (&i, &si) in p_idx.iter().zip(&s) {
                        x[i] += alpha * (si - x[i]);
                    }
                    x[bi] = 0.0;
                    for i in 0..m {
                        if passive[i] && x[i] <= 0.0 {
                            x[i] = 0.0;
                            passive[i] = false;
                        }
                    }
                }
            }
        }
        // an index that immediately drops out would be chosen again forever
        skip = if x == x_before && !passive[j] { Some(j) } else { None };
        history.push(objective(&x));
    }
    Ok(LhOutput {
        x,
        iterations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nnls_small() {
        // columns e1, e2; target (1, -1) projects to (1, 0)
        let a = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let out = lawson_hanson(&a, &y, 1e-14, 10).unwrap();
        assert_relative_eq!(out.x[0], 1.0, max_relative = 1e-14);
        assert_eq!(out.x[1], 0.0);
    }
}
