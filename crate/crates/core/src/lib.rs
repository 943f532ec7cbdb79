//! Inner balayage of discrete measures under regularized Riesz kernels.
//!
//! A measure `omega` on a finite node set is swept onto a target region `A` by
//! minimizing the Gauss functional `I(mu) - 2 I(mu, omega)` over positive
//! measures carried by `A` with total mass at most `omega(X)`. Every result
//! comes with diagnostics that check it against the equivalent descriptions of
//! the swept measure: potential equality on the support, minimal potential,
//! norm and mass within the dominating class, the symmetry relation, the
//! exhaustion limits and the mass formula through the equilibrium measure.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernels`] | kernel parameters, node sets, energy matrices |
//! | [`measures`] | positive and signed measures, masks, exhaustions |
//! | [`energy`] | potentials, mutual energy, Gauss functional |
//! | [`solvers`] | non-negative QP, NNLS projection, brute-force oracle |
//! | [`balayage`] | sweeping, equilibrium, certification checks |
//! | [`oracles`] | Newtonian ball closed forms, refinement studies |
//! | [`cli`] | scenario files and the command-line pipelines |

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balayage;
pub mod cli;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod measures;
pub mod oracles;
pub mod solvers;

pub use error::{Error, Result};
