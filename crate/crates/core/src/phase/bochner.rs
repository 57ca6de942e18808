//! Weighted Bochner positivity test for QCFs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ccr::CcrStructure;
use super::grid::QcfEval;
use crate::error::{Error, Result};
use crate::linalg::min_eig_hermitian;

/// Eigenvalue floor below which a Bochner or Heisenberg matrix is
/// considered indefinite.
pub const PSD_TOL: f64 = 1e-9;

/// `(exp(i u_j.Theta u_k) Phi(u_j - u_k))_{jk}`.
pub fn bochner_matrix<Q: QcfEval + ?Sized>(
    ccr: &CcrStructure,
    qcf: &Q,
    points: &[Vec<f64>],
) -> Result<DMatrix<Complex64>> {
    let n = ccr.n();
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                context: "Bochner point",
                expected: n,
                found: p.len(),
            });
        }
    }
    let l = points.len();
    let mut out = DMatrix::zeros(l, l);
    let mut diff = vec![0.0; n];
    for j in 0..l {
        for k in 0..l {
            for i in 0..n {
                diff[i] = points[j][i] - points[k][i];
            }
            let phi = qcf.eval(&diff).ok_or(Error::OutsideDomain)?;
            let w = Complex64::from_polar(1.0, ccr.symplectic_form(&points[j], &points[k]));
            out[(j, k)] = w * phi;
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of the Bochner matrix over `points`.
pub fn bochner_min_eig<Q: QcfEval + ?Sized>(
    ccr: &CcrStructure,
    qcf: &Q,
    points: &[Vec<f64>],
) -> Result<f64> {
    let m = bochner_matrix(ccr, qcf, points)?;
    // Symmetrize away interpolation round-off before the eigensolve.
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(min_eig_hermitian(&h))
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::phase::gaussian::GaussianBelief;

    fn random_points(rng: &mut ChaCha20Rng, l: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..l)
            .map(|_| (0..2).map(|_| rng.random_range(-scale..scale)).collect())
            .collect()
    }

    #[test]
    fn single_point_is_phi_at_zero() {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        let b = GaussianBelief::new(DVector::from_vec(vec![0.3, 1.0]), DMatrix::identity(2, 2))
            .unwrap();
        let m = bochner_matrix(&ccr, &b, &[vec![0.7, -2.0]]).unwrap();
        assert!((m[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn physical_gaussian_passes() {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        let b = GaussianBelief::new(
            DVector::from_vec(vec![0.5, -0.2]),
            DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.1, 0.5]),
        )
        .unwrap();
        assert!(b.is_physical(&ccr, PSD_TOL));
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..50 {
            let pts = random_points(&mut rng, 5, 3.0);
            assert!(bochner_min_eig(&ccr, &b, &pts).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn unphysical_gaussian_is_caught() {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        let b = GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2) * 0.1).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let found = (0..500).any(|_| {
            let pts = random_points(&mut rng, 6, 4.0);
            bochner_min_eig(&ccr, &b, &pts).unwrap() < -1e-6
        });
        assert!(found);
    }
}
