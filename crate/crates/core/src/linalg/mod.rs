//! Small dense/sparse linear algebra kernel.
//!
//! Everything is `f64`. [`SparseMatrix`] carries adjacency and Laplacian
//! operators in CSR form; [`DenseMatrix`] carries graph signals, hidden
//! states, filters and gradients. [`dense_eig_sym`] is a Jacobi eigensolver
//! for small matrices, used as a reference for spectral computations.

mod dense;
mod eigen;
mod sparse;

pub use dense::DenseMatrix;
pub use eigen::{dense_eig_sym, power_iteration, EigenEstimate, JACOBI_MAX_DIM};
pub use sparse::SparseMatrix;

pub(crate) use eigen::power_iterate;
