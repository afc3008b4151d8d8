//! Thin bridges between the dense `ndarray` representations used everywhere
//! and the `nalgebra` decompositions needed for pseudoinverses, singular
//! values and Hermitian spectra.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) fn to_na(m: &Array2<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_row_iterator(m.nrows(), m.ncols(), m.iter().copied())
}

pub(crate) fn to_nd(m: &DMatrix<Complex64>) -> Array2<Complex64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)])
}

/// Singular values in descending order.
pub(crate) fn singular_values(m: &Array2<Complex64>) -> Vec<f64> {
    let mut sv: Vec<f64> = to_na(m).svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Moore–Penrose pseudoinverse with singular values below
/// `rel_tol * sigma_max` treated as zero.
pub(crate) fn pinv(m: &Array2<Complex64>, rel_tol: f64) -> Result<Array2<Complex64>> {
    let svd = to_na(m).svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = if smax > 0.0 { rel_tol * smax } else { rel_tol };
    let pi = svd
        .pseudo_inverse(eps)
        .map_err(|e| Error::RankDeficientFrame { context: e.to_string() })?;
    Ok(to_nd(&pi))
}

/// Number of singular values above `rel_tol * sigma_max`.
pub(crate) fn rank(m: &Array2<Complex64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        None | Some(&0.0) => 0,
        Some(&smax) => sv.iter().filter(|&&s| s > rel_tol * smax).count(),
    }
}

/// Eigenvalues of the Hermitian part (M + M†)/2, ascending.
pub(crate) fn hermitian_eigenvalues(m: &Array2<Complex64>) -> Vec<f64> {
    let a = to_na(m);
    let herm = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Largest absolute deviation of M from its own adjoint.
pub(crate) fn hermiticity_deviation(m: &Array2<Complex64>) -> f64 {
    let mut dev = 0.0f64;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

/// Max-norm distance between two equally shaped matrices.
pub(crate) fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
