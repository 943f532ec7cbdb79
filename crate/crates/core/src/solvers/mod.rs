//! Non-negative quadratic programs with an optional total-mass cap.
//!
//! All solvers address
//!
//! ```text
//!     minimize    1/2 w' Q w - b' w
//!     subject to  w >= 0,  1' w <= H   (cap optional)
//! ```
//!
//! with `Q` a principal submatrix of a validated kernel matrix. Optimality is
//! certified by [`kkt_residuals`], which recomputes everything from `(Q, b, w)`.

mod brute;
mod nnls;
mod pgbb;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

pub use brute::{brute_force_active_set, BRUTE_FORCE_MAX};
pub use nnls::projection_onto_cone;
pub use pgbb::{solve_nnqp, solve_nnqp_from};

/// Relative tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct NnqpProblem {
    q: DMatrix<f64>,
    b: DVector<f64>,
    mass_cap: Option<f64>,
}

impl NnqpProblem {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>, mass_cap: Option<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != b.len() {
            return Err(Error::Parameter(format!(
                "matrix {}x{} does not match vector of length {}",
                q.nrows(),
                q.ncols(),
                b.len()
            )));
        }
        if q.nrows() == 0 {
            return Err(Error::Parameter("empty problem".into()));
        }
        if q.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("problem data must be finite".into()));
        }
        for i in 0..q.nrows() {
            for j in 0..i {
                if q[(i, j)] != q[(j, i)] {
                    return Err(Error::Parameter("matrix is not symmetric".into()));
                }
            }
        }
        if let Some(h) = mass_cap {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Parameter(format!("mass cap must be positive, got {h}")));
            }
        }
        Ok(Self { q, b, mass_cap })
    }

    /// Problem on the principal submatrix of `m` selected by `idx`.
    pub fn from_kernel(
        m: &KernelMatrix,
        idx: &[usize],
        b: Vec<f64>,
        mass_cap: Option<f64>,
    ) -> Result<Self> {
        Self::new(m.principal(idx), DVector::from_vec(b), mass_cap)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn mass_cap(&self) -> Option<f64> {
        self.mass_cap
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }

    /// `1/2 w'Qw - b'w`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        0.5 * w.dot(&(&self.q * &w)) - self.b.dot(&w)
    }

    /// Scale that turns the relative tolerance into an absolute one.
    pub fn scale(&self) -> f64 {
        let s = self.b.amax();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative to `max |b_i|`.
    pub tol: f64,
    /// Defaults to `50 * m`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            max_iter: None,
        }
    }

    pub(crate) fn iteration_cap(&self, m: usize) -> usize {
        self.max_iter.unwrap_or(50 * m).max(1)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.tol > 0.0 && self.tol.is_finite() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("tolerance must be positive, got {}", self.tol)))
        }
    }
}

/// Optimality certificate of a solver iterate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KktReport {
    /// Max of `|g_i|` over active nodes and `(-g_i)+` over all nodes,
    /// with `g = Qw - b + eta 1`.
    pub stationarity_residual: f64,
    /// `max_i |w_i g_i| + eta |H - 1'w|`.
    pub complementarity_residual: f64,
    /// `max((-w_i)+, (1'w - H)+)`.
    pub feasibility_violation: f64,
    /// Indices with `w_i > tol * max_j w_j`.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    /// Absolute tolerance the residuals are judged against.
    pub tolerance: f64,
}

impl KktReport {
    /// Whether the residuals meet the tolerance the report was built with.
    pub fn converged(&self, total_mass: f64) -> bool {
        let mass_scale = total_mass.max(1.0);
        self.stationarity_residual <= self.tolerance
            && self.complementarity_residual <= self.tolerance * mass_scale
            && self.feasibility_violation <= self.tolerance * mass_scale
    }
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct NnqpSolution {
    pub weights: Vec<f64>,
    /// Multiplier of the mass cap (zero when absent or inactive).
    pub multiplier: f64,
    pub report: KktReport,
    /// Objective of the iterated problem after every accepted step.
    pub objective_history: Vec<f64>,
}

impl NnqpSolution {
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Recomputes the KKT residuals of `w` with cap multiplier `eta`.
pub fn kkt_residuals(p: &NnqpProblem, w: &[f64], eta: f64, tol: f64) -> KktReport {
    let abs_tol = tol * p.scale();
    let wv = DVector::from_column_slice(w);
    let g = &p.q * &wv - &p.b;
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let thresh = tol * wmax;
    let mut stationarity: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut infeas: f64 = 0.0;
    let mut active_set = Vec::new();
    for i in 0..w.len() {
        let gi = g[i] + eta;
        if w[i] > thresh && w[i] > 0.0 {
            active_set.push(i);
            stationarity = stationarity.max(gi.abs());
        }
        stationarity = stationarity.max(-gi);
        comp = comp.max((w[i] * gi).abs());
        infeas = infeas.max(-w[i]);
    }
    let mass: f64 = w.iter().sum();
    if let Some(h) = p.mass_cap {
        comp += eta.abs() * (h - mass).abs();
        infeas = infeas.max(mass - h);
    }
    KktReport {
        stationarity_residual: stationarity,
        complementarity_residual: comp,
        feasibility_violation: infeas.max(0.0),
        active_set,
        iterations: 0,
        tolerance: abs_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_validation() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.2, 2.0]);
        assert!(NnqpProblem::new(q, DVector::from_vec(vec![1.0, 1.0]), None).is_err());
        let q = DMatrix::identity(2, 2);
        assert!(NnqpProblem::new(q.clone(), DVector::from_vec(vec![1.0]), None).is_err());
        assert!(NnqpProblem::new(q.clone(), DVector::from_vec(vec![1.0, 1.0]), Some(0.0)).is_err());
        assert!(NnqpProblem::new(q, DVector::from_vec(vec![1.0, f64::NAN]), None).is_err());
    }

    #[test]
    fn kkt_of_known_optimum() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let p = NnqpProblem::new(q, DVector::from_vec(vec![2.0, -2.0]), None).unwrap();
        let r = kkt_residuals(&p, &[1.0, 0.0], 0.0, 1e-9);
        assert_eq!(r.stationarity_residual, 0.0);
        assert_eq!(r.complementarity_residual, 0.0);
        assert_eq!(r.feasibility_violation, 0.0);
        assert_eq!(r.active_set, vec![0]);
        assert!(r.converged(1.0));
        let bad = kkt_residuals(&p, &[0.5, 0.0], 0.0, 1e-9);
        assert!(!bad.converged(0.5));
    }
}
