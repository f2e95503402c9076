//! L1-norm principal component analysis.
//!
//! Maximizes `‖XᵀQ‖₁` over matrices `Q` with orthonormal columns through the
//! two-block form `min −⟨P, XᵀQ⟩` over sign matrices `P` and Stiefel points
//! `Q`. Solvers live in [`solvers`]; [`verify`] numerically checks the
//! structural inequalities behind their convergence.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{CscMatrix, DataMatrix, Mat};
pub use model::{ProblemInstance, SignMatrix, StiefelPoint};
pub use solvers::{Method, SolveResult, SolverConfig};
