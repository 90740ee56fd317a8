//! Dense complex linear algebra, tensor-leg kernels, spectral norms and
//! certified numerical rank.

mod eig;
mod matrix;
mod rank;
mod spectral;
pub mod tensor;

use thiserror::Error;

pub use eig::{hermitian_eigen, polar_unitary, symmetric_eigen};
pub use matrix::{kron, kron_all, matmul, ComplexMatrix};
pub use rank::{gram_resolution, numerical_rank, rank_from_gram, RankReport, CERTIFY_GAP, DEFAULT_REL_TOL};
pub use spectral::{
    filtered_subspace_iteration, spectral_norm, spectral_norm_with, subspace_iteration, IterationOutcome,
    LinearOperator, NormEstimate, NormOptions, RitzState, DEFAULT_NORM_TOL,
};

pub type C64 = num_complex::Complex64;

/// Largest matrix side handled densely.
pub const DENSE_CAP: usize = 20_000;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("matrix side {side} exceeds the dense cap of {cap}; use the matrix-free backend")]
    SizeCapExceeded { side: usize, cap: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("no convergence after {iterations} iterations (estimate {estimate:?}, bound {bound:?})")]
    NoConvergence {
        iterations: usize,
        estimate: Option<f64>,
        bound: Option<f64>,
    },
    #[error("decomposition failed: {0}")]
    Decomposition(String),
}
