//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) fn check_square(m: &DMatrix<f64>, n: usize, context: &'static str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

pub(crate) fn check_len(v: &[f64], n: usize, context: &'static str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: v.len(),
        });
    }
    Ok(())
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Frobenius inner product `tr(a^T b)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Kronecker product.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eig_symmetric(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of the Hermitian matrix `re + i im` (`re` symmetric,
/// `im` antisymmetric), via the real embedding `[[re, -im], [im, re]]` whose
/// spectrum is that of the Hermitian matrix with every eigenvalue doubled.
pub fn min_eig_hermitian_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> f64 {
    let n = re.nrows();
    let mut emb = DMatrix::zeros(2 * n, 2 * n);
    emb.view_mut((0, 0), (n, n)).copy_from(re);
    emb.view_mut((n, n), (n, n)).copy_from(re);
    emb.view_mut((0, n), (n, n)).copy_from(&(-im));
    emb.view_mut((n, 0), (n, n)).copy_from(im);
    min_eig_symmetric(&emb)
}

/// Smallest eigenvalue of a complex Hermitian matrix.
pub fn min_eig_hermitian(h: &DMatrix<Complex64>) -> f64 {
    let re = h.map(|z| z.re);
    let im = h.map(|z| z.im);
    min_eig_hermitian_parts(&symmetrize(&re), &((&im - im.transpose()) * 0.5))
}

/// Inverse of a symmetric positive definite matrix, failing with the
/// smallest eigenvalue when the Cholesky factorization breaks down.
pub fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    match m.clone().cholesky() {
        Some(ch) => Ok(ch.inverse()),
        None => Err(Error::NotPositiveDefinite {
            context: context.to_string(),
            min_eig: min_eig_symmetric(m),
        }),
    }
}

/// Upper triangle (row-major, including the diagonal).
pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Nearest symmetric matrix whose eigenvalues are at least `floor`.
pub fn project_spd(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&vals) * v.transpose()))
}

pub(crate) fn all_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn all_finite_mat(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Real and imaginary parts of a complex matrix.
pub fn split_complex(m: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_embedding_matches_known_spectrum() {
        // [[1, i/2], [-i/2, 1]] has eigenvalues 1/2 and 3/2.
        let re = DMatrix::identity(2, 2);
        let im = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]);
        assert!((min_eig_hermitian_parts(&re, &im) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn projection_floors_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let p = project_spd(&m, 1e-3);
        assert!((min_eig_symmetric(&p) - 1e-3).abs() < 1e-12);
    }
}
