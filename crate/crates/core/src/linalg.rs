//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Complex, DMatrix};
use ndarray::Array2;
use num_complex::Complex64;

pub(crate) fn to_nalgebra(m: &Array2<Complex64>) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[[r, c]])
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in descending order with the matching eigenvectors as
/// columns. The input is symmetrized first to strip floating-point
/// asymmetry.
pub(crate) fn hermitian_eigen(m: &Array2<Complex64>) -> (Vec<f64>, Array2<Complex64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_eigen needs a square matrix");
    let mut sym = DMatrix::from_fn(n, n, |r, c| 0.5 * (m[[r, c]] + m[[c, r]].conj()));
    // Force exactly real diagonal entries.
    for i in 0..n {
        sym[(i, i)] = Complex::new(sym[(i, i)].re, 0.0);
    }
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = eig.eigenvectors[(row, src)];
        }
    }
    (values, vectors)
}

/// Singular values in descending order.
pub(crate) fn singular_values(m: &Array2<Complex64>) -> Vec<f64> {
    let svd = nalgebra::SVD::new(to_nalgebra(m), false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Numerical rank with a relative threshold on singular values.
pub(crate) fn numerical_rank(m: &Array2<Complex64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}
