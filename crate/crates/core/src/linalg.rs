//! Small dense helpers on system operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::Operator;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry of |A − A†|.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Accepts `a` if it is square and Hermitian to `tol` relative to its
/// largest entry (absolute when the operator is tiny).
pub fn check_hermitian(a: &Operator, tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(invalid(format!(
            "operator must be square (got {}x{})",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let d = hermiticity_defect(a);
    if d > tol * scale {
        return Err(Error::NotHermitian(d));
    }
    Ok(())
}

pub fn real_diag(values: &[f64]) -> Operator {
    let mut m = DMatrix::zeros(values.len(), values.len());
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = c(v, 0.0);
    }
    m
}

pub fn from_real_rows(rows: &[&[f64]]) -> Operator {
    let n = rows.len();
    DMatrix::from_fn(n, rows[0].len(), |i, j| c(rows[i][j], 0.0))
}

pub fn trace(a: &Operator) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Spectral decomposition of a Hermitian matrix: eigenvalues and
/// orthonormal eigenvectors as columns.
pub fn hermitian_eigen(a: &Operator) -> (Vec<f64>, Operator) {
    let eig = a.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Max-entry norm.
pub fn max_abs(a: &Operator) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest |eigenvalue| of a Hermitian matrix.
pub fn spectral_radius_hermitian(a: &Operator) -> f64 {
    hermitian_eigen(a)
        .0
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_check() {
        let mut a = from_real_rows(&[&[1.0, 2.0], &[2.0, -1.0]]);
        assert!(check_hermitian(&a, 1e-14).is_ok());
        a[(0, 1)] = c(2.0, 1e-3);
        assert!(matches!(check_hermitian(&a, 1e-14), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eigen_of_sigma_x() {
        let sx = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let (mut v, _) = hermitian_eigen(&sx);
        v.sort_by(f64::total_cmp);
        assert!((v[0] + 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
        assert!((spectral_radius_hermitian(&sx) - 1.0).abs() < 1e-14);
    }
}
