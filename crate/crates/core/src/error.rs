use thiserror::Error;

use crate::solvers::KktReport;

/// Errors produced by kernel assembly, measure handling, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("measure or mask does not live on the kernel's node set")]
    NodeSetMismatch,

    #[error("solver error: {0}")]
    Solver(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Box<BestIterate>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource cap exceeded: {what} = {value} > {cap}")]
    ResourceCap {
        what: &'static str,
        value: usize,
        cap: usize,
    },
}

/// Best iterate carried by a convergence failure.
#[derive(Debug, Clone)]
pub struct BestIterate {
    pub weights: Vec<f64>,
    pub multiplier: f64,
    pub report: KktReport,
}

pub type Result<T> = std::result::Result<T, Error>;
