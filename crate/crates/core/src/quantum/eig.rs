use nalgebra::SymmetricEigen;

use super::matrix::{hermiticity_error, max_abs, ComplexMatrix};
use crate::error::{usage, Result};

/// Relative Hermiticity tolerance accepted by [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Spectral decomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns, so that `h = V diag(λ) V†`.
pub fn herm_eig(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !h.is_square() {
        return usage(format!("herm_eig needs a square matrix, got {}x{}", h.nrows(), h.ncols()));
    }
    let scale = max_abs(h).max(1.0);
    let err = hermiticity_error(h);
    if err > HERMITIAN_TOL * scale {
        return usage(format!("matrix is not Hermitian (max |h - h†| = {err:.3e})"));
    }
    let dim = h.nrows();
    if dim == 0 {
        return Ok((Vec::new(), h.clone()));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Rebuilds `V diag(λ) V†`.
pub fn reconstruct(values: &[f64], vectors: &ComplexMatrix) -> ComplexMatrix {
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    scaled * vectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::matrix::{diag, transition};
    use num_complex::Complex64;

    #[test]
    fn diagonal_input_sorted() {
        let (vals, _) = herm_eig(&diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn symmetric_coupling() {
        let g = 0.7;
        let h = (transition(2, 0, 1) + transition(2, 1, 0)) * Complex64::new(g, 0.0);
        let (vals, _) = herm_eig(&h).unwrap();
        assert!((vals[0] + g).abs() < 1e-15 && (vals[1] - g).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        assert!(herm_eig(&transition(2, 0, 1)).is_err());
    }
}
