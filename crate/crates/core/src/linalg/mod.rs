//! Dense and sparse matrices plus the small set of factorizations the solvers need.

mod dense;
mod norms;
mod sparse;
mod svd;

pub use dense::{axpy, dot, norm2, Mat};
pub use norms::{spectral_norm, stiefel_residual};
pub use sparse::{CscMatrix, DataMatrix};
pub use svd::{orthonormal_complement, polar_factor, sym_eigen, thin_svd, ThinSvd};
