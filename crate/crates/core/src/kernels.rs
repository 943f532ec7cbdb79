//! Regularized Riesz kernels and their energy matrices over node sets.
//!
//! The kernel of order `alpha` in `R^n` is smoothed on the diagonal:
//!
//! ```text
//!     k_eps(x, y) = (|x - y|^2 + eps^2)^((alpha - n) / 2)
//! ```
//!
//! With `0 < alpha <= 2 < n` this is a completely monotone function of
//! `|x - y|^2`, so the assembled matrix stays strictly positive definite for
//! distinct nodes. Values carry units of `length^(alpha - n)`; no unit system
//! is enforced.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the matrix dimension accepted by the eigenvalue check.
pub const DEFAULT_EIGEN_CAP: usize = 500;

/// Parameters of a regularized Riesz kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    dimension: usize,
    order: f64,
    regularization: f64,
}

impl KernelSpec {
    /// Constant of the maximum principle. Riesz kernels with `alpha <= 2`
    /// satisfy Frostman's principle, so the mass cap is `H * omega(X)` with `H = 1`.
    pub const MAX_PRINCIPLE_CONSTANT: f64 = 1.0;

    pub fn new(dimension: usize, order: f64, regularization: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Parameter(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        if !(order > 0.0 && order <= 2.0) {
            return Err(Error::Parameter(format!(
                "order must lie in (0, 2], got {order}"
            )));
        }
        if order >= dimension as f64 {
            return Err(Error::Parameter(format!(
                "order {order} must be smaller than the dimension {dimension}"
            )));
        }
        if !(regularization >= 0.0 && regularization.is_finite()) {
            return Err(Error::Parameter(format!(
                "regularization must be finite and non-negative, got {regularization}"
            )));
        }
        Ok(Self {
            dimension,
            order,
            regularization,
        })
    }

    /// Newtonian kernel in `R^3` (`alpha = 2`).
    pub fn newtonian(regularization: f64) -> Result<Self> {
        Self::new(3, 2.0, regularization)
    }

    /// Same kernel with the regularization set to half the minimum node spacing.
    pub fn with_auto_regularization(self, nodes: &NodeSet) -> Result<Self> {
        let spacing = nodes.min_spacing().ok_or_else(|| {
            Error::Parameter("automatic regularization needs at least two nodes".into())
        })?;
        Self::new(self.dimension, self.order, 0.5 * spacing)
    }

    pub fn with_regularization(self, regularization: f64) -> Result<Self> {
        Self::new(self.dimension, self.order, regularization)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn exponent(&self) -> f64 {
        self.order - self.dimension as f64
    }

    pub fn is_newtonian(&self) -> bool {
        self.dimension == 3 && self.order == 2.0
    }

    /// Kernel value as a function of the squared distance.
    pub fn profile(&self, dist2: f64) -> f64 {
        let eps2 = self.regularization * self.regularization;
        let r2 = dist2 + eps2;
        if r2 == 0.0 {
            return f64::INFINITY;
        }
        let e = self.exponent();
        // exact shortcuts for the common exponents
        if e == -1.0 {
            1.0 / r2.sqrt()
        } else if e == -2.0 {
            1.0 / r2
        } else {
            r2.powf(0.5 * e)
        }
    }
}

/// Kernel value at a pair of points; `f64::INFINITY` on the diagonal when unregularized.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != spec.dimension || y.len() != spec.dimension {
        return Err(Error::Parameter(format!(
            "point dimensions ({}, {}) do not match kernel dimension {}",
            x.len(),
            y.len(),
            spec.dimension
        )));
    }
    Ok(spec.profile(dist2(x, y)))
}

pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Points of `R^n` with quadrature weights; the carrier of every measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
    quad_weights: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl NodeSet {
    pub fn new(points: Vec<Vec<f64>>, quad_weights: Vec<f64>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Parameter("a node set needs at least one point".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Parameter("points must have at least one coordinate".into()));
        }
        if quad_weights.len() != points.len() {
            return Err(Error::Parameter(format!(
                "{} quadrature weights for {} points",
                quad_weights.len(),
                points.len()
            )));
        }
        if let Some(w) = quad_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Parameter(format!(
                "quadrature weights must be positive and finite, got {w}"
            )));
        }
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in &points {
            if p.len() != dim {
                return Err(Error::Parameter("points have mixed dimensions".into()));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Parameter("point coordinates must be finite".into()));
            }
            coords.extend_from_slice(p);
        }
        let nodes = Self {
            dim,
            coords,
            quad_weights,
            labels: None,
        };
        for i in 0..nodes.len() {
            for j in 0..i {
                if nodes.point(i) == nodes.point(j) {
                    return Err(Error::Parameter(format!("nodes {j} and {i} coincide")));
                }
            }
        }
        Ok(nodes)
    }

    /// Node set with unit quadrature weights.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Parameter(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad_weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn quad_weight(&self, i: usize) -> f64 {
        self.quad_weights[i]
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Smallest pairwise distance, `None` for a single node.
    pub fn min_spacing(&self) -> Option<f64> {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in 0..i {
                best = best.min(dist2(self.point(i), self.point(j)));
            }
        }
        best.is_finite().then(|| best.sqrt())
    }

    /// Index of a node at exactly these coordinates.
    pub fn find(&self, x: &[f64]) -> Option<usize> {
        self.points().position(|p| p == x)
    }
}

/// Symmetric energy matrix `M[i][j] = k_eps(x_i, x_j)` over a shared node set.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    spec: KernelSpec,
    nodes: Arc<NodeSet>,
    entries: DMatrix<f64>,
}

/// Builds the energy matrix; requires a positive regularization.
pub fn assemble_matrix(spec: &KernelSpec, nodes: Arc<NodeSet>) -> Result<KernelMatrix> {
    if spec.regularization <= 0.0 {
        return Err(Error::Configuration(
            "matrix assembly needs a positive regularization (the diagonal is singular)".into(),
        ));
    }
    if nodes.dim() != spec.dimension {
        return Err(Error::Parameter(format!(
            "node dimension {} does not match kernel dimension {}",
            nodes.dim(),
            spec.dimension
        )));
    }
    let n = nodes.len();
    let mut entries = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = spec.profile(dist2(nodes.point(i), nodes.point(j)));
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(KernelMatrix {
        spec: *spec,
        nodes,
        entries,
    })
}

impl KernelMatrix {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `M w` with a fixed row-wise summation order.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.len());
        (0..self.len())
            .map(|i| {
                self.entries
                    .row(i)
                    .iter()
                    .zip(w)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }

    /// Principal submatrix on the given node indices.
    pub fn principal(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])])
    }

    /// Whether `nodes` is the node set this matrix was assembled over.
    pub fn same_nodes(&self, nodes: &Arc<NodeSet>) -> bool {
        Arc::ptr_eq(&self.nodes, nodes) || *self.nodes == **nodes
    }

    pub fn check_positive_definite(&self, tol: f64) -> Result<PdReport> {
        check_positive_definite(&self.entries, tol)
    }
}

/// Result of the smallest-eigenvalue check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdReport {
    pub min_eigenvalue: f64,
    pub pass: bool,
}

/// Passes iff the smallest eigenvalue of the symmetric matrix exceeds `tol`.
pub fn check_positive_definite(m: &DMatrix<f64>, tol: f64) -> Result<PdReport> {
    check_positive_definite_capped(m, tol, DEFAULT_EIGEN_CAP)
}

pub fn check_positive_definite_capped(m: &DMatrix<f64>, tol: f64, cap: usize) -> Result<PdReport> {
    if !m.is_square() {
        return Err(Error::Parameter("matrix is not square".into()));
    }
    if m.nrows() > cap {
        return Err(Error::ResourceCap {
            what: "matrix dimension",
            value: m.nrows(),
            cap,
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Parameter("empty matrix".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PdReport {
        min_eigenvalue,
        pass: min_eigenvalue > tol,
    })
}
