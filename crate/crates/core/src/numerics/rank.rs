use faer::MatRef;
use serde::Serialize;

use super::eig::hermitian_eigenvalues;
use super::{ComplexMatrix, NumericsError, C64, DENSE_CAP};

/// Default relative singular-value cutoff.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Gap ratios below this mark a rank as uncertain.
pub const CERTIFY_GAP: f64 = 1e4;

/// Numerical rank with the singular-value gap that separates kept from
/// discarded values.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RankReport {
    pub rank: usize,
    /// `σ_rank / σ_{rank+1}`; infinite when nothing is discarded or nothing
    /// is kept, or when every discarded value is exactly zero.
    pub gap_ratio: f64,
    /// Singular values, descending.
    #[serde(skip)]
    pub singular_values: Vec<f64>,
    /// The relative cutoff actually applied (see [`rank_from_gram`]).
    pub effective_rel_tol: f64,
}

impl RankReport {
    pub fn is_certain(&self) -> bool {
        self.gap_ratio >= CERTIFY_GAP
    }

    pub fn nullity(&self) -> usize {
        self.singular_values.len() - self.rank
    }
}

/// Relative size below which singular values recovered from the eigenvalues
/// of an `n×n` Gram matrix are indistinguishable from zero.
///
/// Eigenvalues of `A†A` carry absolute errors of order `n·ε·‖A‖²`, so after
/// the square root the floor on `σ/σ_max` is `sqrt(n·ε)`.
pub fn gram_resolution(n: usize) -> f64 {
    (n as f64 * f64::EPSILON).sqrt()
}

/// Rank of an explicit matrix: singular values `σ > rel_tol · σ_max` count.
///
/// Singular values come from a direct SVD here, so tiny values keep their
/// relative accuracy. Callers that already hold the Gram matrix use
/// [`rank_from_gram`] instead.
pub fn numerical_rank(a: &ComplexMatrix, rel_tol: f64) -> Result<RankReport, NumericsError> {
    if a.cols() > DENSE_CAP || a.rows() > DENSE_CAP {
        return Err(NumericsError::SizeCapExceeded {
            side: a.rows().max(a.cols()),
            cap: DENSE_CAP,
        });
    }
    let mut singular_values = a
        .to_faer()
        .singular_values()
        .map_err(|e| NumericsError::Decomposition(format!("{e:?}")))?;
    singular_values.sort_by(|x, y| y.total_cmp(x));
    Ok(rank_from_singular_values(singular_values, rel_tol))
}

/// Rank analysis of the matrix whose Gram matrix `A†A` is `gram`.
///
/// A singular value counts when it exceeds
/// `max(rel_tol, gram_resolution(n)) · σ_max`.
pub fn rank_from_gram(gram: MatRef<'_, C64>, rel_tol: f64) -> Result<RankReport, NumericsError> {
    if gram.nrows() != gram.ncols() {
        return Err(NumericsError::DimensionMismatch {
            expected: "square Gram matrix".into(),
            found: format!("{}x{}", gram.nrows(), gram.ncols()),
        });
    }
    let n = gram.nrows();
    let eigenvalues = hermitian_eigenvalues(gram)?;
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::Decomposition(
            "non-finite eigenvalue in Gram matrix".into(),
        ));
    }
    let mut singular_values: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(rank_from_singular_values(
        singular_values,
        rel_tol.max(gram_resolution(n)),
    ))
}

pub(crate) fn rank_from_singular_values(singular_values: Vec<f64>, rel_tol: f64) -> RankReport {
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * sigma_max;
    let rank = if sigma_max > 0.0 {
        singular_values.iter().take_while(|&&s| s > cutoff).count()
    } else {
        0
    };
    let gap_ratio = if rank == 0 || rank == singular_values.len() {
        f64::INFINITY
    } else {
        let kept = singular_values[rank - 1];
        let dropped = singular_values[rank];
        if dropped == 0.0 {
            f64::INFINITY
        } else {
            kept / dropped
        }
    };
    RankReport {
        rank,
        gap_ratio,
        singular_values,
        effective_rel_tol: rel_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_product_has_rank_one() {
        let u = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let v = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let a = ComplexMatrix::from_fn(2, 3, |i, j| u[i] * v[j].conj());
        let r = numerical_rank(&a, DEFAULT_REL_TOL).unwrap();
        assert_eq!(r.rank, 1);
        assert!(r.is_certain());
    }

    #[test]
    fn threshold_definition() {
        let a = ComplexMatrix::from_diag(&[C64::new(1.0, 0.0), C64::new(1e-14, 0.0)]);
        let r = numerical_rank(&a, 1e-10).unwrap();
        assert_eq!(r.rank, 1);
        assert!((r.gap_ratio / 1e14 - 1.0).abs() < 1e-6, "{}", r.gap_ratio);
    }

    #[test]
    fn zero_matrix_and_full_rank() {
        let r = numerical_rank(&ComplexMatrix::zeros(3, 3), DEFAULT_REL_TOL).unwrap();
        assert_eq!(r.rank, 0);
        assert_eq!(r.gap_ratio, f64::INFINITY);
        let r = numerical_rank(&ComplexMatrix::identity(5), DEFAULT_REL_TOL).unwrap();
        assert_eq!(r.rank, 5);
        assert_eq!(r.gap_ratio, f64::INFINITY);
    }

    #[test]
    fn small_gap_is_uncertain() {
        let a = ComplexMatrix::from_diag(&[C64::new(1.0, 0.0), C64::new(1e-5, 0.0), C64::new(1e-8, 0.0)]);
        let r = numerical_rank(&a, 1e-7).unwrap();
        assert_eq!(r.rank, 2);
        assert!(!r.is_certain());
    }
}
