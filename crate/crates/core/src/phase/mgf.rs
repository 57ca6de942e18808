//! The Gaussian moment-generating function `phi(z) = exp(z^T Sigma^-1 z / 4)`
//! on complex arguments, with its gradient and Hessian.
//!
//! Products are bilinear (`z^T`, not `z^*`).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::spd_inverse;

/// `phi_Sigma` with the inverse covariance precomputed.
#[derive(Debug, Clone)]
pub struct Mgf {
    sigma_inv: DMatrix<Complex64>,
}

impl Mgf {
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        let inv = spd_inverse(sigma, "mgf covariance")?;
        Ok(Self {
            sigma_inv: inv.map(|v| Complex64::new(v, 0.0)),
        })
    }

    pub fn sigma_inv(&self) -> &DMatrix<Complex64> {
        &self.sigma_inv
    }

    pub fn phi(&self, z: &DVector<Complex64>) -> Complex64 {
        let sz = &self.sigma_inv * z;
        (z.transpose() * sz)[(0, 0)].scale(0.25).exp()
    }

    /// `½ phi(z) Sigma^-1 z`.
    pub fn grad(&self, z: &DVector<Complex64>) -> DVector<Complex64> {
        let sz = &self.sigma_inv * z;
        let phi = (z.transpose() * &sz)[(0, 0)].scale(0.25).exp();
        sz * (phi * 0.5)
    }

    /// `½ phi(z) (Sigma^-1 + ½ Sigma^-1 z z^T Sigma^-1)`.
    pub fn hess(&self, z: &DVector<Complex64>) -> DMatrix<Complex64> {
        let sz = &self.sigma_inv * z;
        let phi = (z.transpose() * &sz)[(0, 0)].scale(0.25).exp();
        (&self.sigma_inv + &sz * sz.transpose() * Complex64::new(0.5, 0.0)) * (phi * 0.5)
    }
}

pub fn mgf_phi(sigma: &DMatrix<f64>, z: &DVector<Complex64>) -> Result<Complex64> {
    Ok(Mgf::new(sigma)?.phi(z))
}

pub fn mgf_grad(sigma: &DMatrix<f64>, z: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    Ok(Mgf::new(sigma)?.grad(z))
}

pub fn mgf_hess(sigma: &DMatrix<f64>, z: &DVector<Complex64>) -> Result<DMatrix<Complex64>> {
    Ok(Mgf::new(sigma)?.hess(z))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::E;

    use super::*;

    fn c(v: &[f64]) -> DVector<Complex64> {
        DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
    }

    #[test]
    fn values_at_origin() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = Mgf::new(&s).unwrap();
        let z = c(&[0.0, 0.0]);
        assert_eq!(m.phi(&z), Complex64::new(1.0, 0.0));
        assert!(m.grad(&z).iter().all(|g| g.norm() == 0.0));
        let h = m.hess(&z);
        let inv = s.try_inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)].re - 0.5 * inv[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_covariance_example() {
        let m = Mgf::new(&DMatrix::identity(2, 2)).unwrap();
        let z = c(&[2.0, 0.0]);
        assert!((m.phi(&z).re - E).abs() < 1e-14);
        let g = m.grad(&z);
        assert!((g[0].re - E).abs() < 1e-14 && g[1].norm() < 1e-15);
        let h = m.hess(&z);
        // ½e(1 + ½·4) = 1.5e on the (0,0) entry, ½e on (1,1).
        assert!((h[(0, 0)].re - 1.5 * E).abs() < 1e-13);
        assert!((h[(1, 1)].re - 0.5 * E).abs() < 1e-13);
        assert!(h[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn singular_covariance_fails() {
        assert!(Mgf::new(&DMatrix::zeros(2, 2)).is_err());
    }
}
