use faer::{Mat, MatRef, Side};

use super::{ComplexMatrix, NumericsError, C64};

/// Eigenvalues (ascending) of a Hermitian matrix; only the lower triangle is read.
pub(crate) fn hermitian_eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<f64>, NumericsError> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| NumericsError::Decomposition(format!("{e:?}")))
}

/// Full eigendecomposition of a Hermitian matrix. Eigenvalues ascending;
/// eigenvectors are the columns of the returned matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let n = m.rows();
    // Symmetrize so round-off in the input cannot leak into the solver.
    let h = Mat::<C64>::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| NumericsError::Decomposition(format!("{e:?}")))?;
    let s = evd.S();
    let values = (0..n).map(|i| s[i].re).collect();
    Ok((values, ComplexMatrix::from_faer(evd.U())))
}

/// Eigendecomposition of a real symmetric matrix given row-major.
/// Returns ascending eigenvalues and column eigenvectors (row-major `n×n`).
pub fn symmetric_eigen(n: usize, data: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NumericsError> {
    assert_eq!(data.len(), n * n);
    let h = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (data[i * n + j] + data[j * n + i]));
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| NumericsError::Decomposition(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values = (0..n).map(|i| s[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            vectors[i * n + j] = u[(i, j)];
        }
    }
    Ok((values, vectors))
}

/// Nearest unitary in Frobenius norm (the unitary polar factor `W` of `A = W P`).
pub fn polar_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let svd = m
        .to_faer()
        .svd()
        .map_err(|e| NumericsError::Decomposition(format!("{e:?}")))?;
    let w = svd.U() * svd.V().adjoint();
    Ok(ComplexMatrix::from_faer(w.as_ref()))
}
