//! Linear algebra shared by the reservoir and the harness.

mod dense;
mod eigen;
mod fit;
mod ridge;
mod sparse;
mod spectral;

pub use dense::DenseMat;
pub use eigen::{dense_eigenvalues, dense_spectral_radius};
pub use fit::{average_ranks, linear_fit, spearman, LineFit};
pub use ridge::{ridge_solve, ridge_solve_with_rcond, RidgeFactorization, DEFAULT_RCOND};
pub use sparse::SparseMat;
pub use spectral::{rescale_to_radius, spectral_radius, DENSE_CUTOFF};
