//! Dense numerical primitives: linear programs over small polyhedra,
//! Euclidean projection onto polyhedra, and symmetric matrix functions.
//!
//! Every polyhedron is stored in the lifted form `{z : E z = e, l <= z <= u}`
//! with per-variable bounds that may be infinite. Problem sizes are a few
//! hundred variables at most, so everything here is dense.

mod linalg;
mod polyhedron;
mod qp;
mod simplex;

pub use linalg::{orthonormal_column_basis, psd_sqrt};
pub use polyhedron::Polyhedron;
pub use qp::{project_polyhedron, project_weighted, QpSolution};
pub use simplex::{lp_solve, LpSolution, LpStatus, Sense};

use thiserror::Error;

/// Primal feasibility tolerance for LP solutions (relative to data scale).
pub const TOL_FEAS: f64 = 1e-9;
/// Objective tolerance for projections.
pub const TOL_PROJ: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("polyhedron is empty")]
    Infeasible,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:e})")]
    Indefinite { min_eigenvalue: f64 },
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}
