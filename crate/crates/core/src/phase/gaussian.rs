use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_square, max_abs, min_eig_hermitian_parts, symmetrize};
use crate::phase::ccr::CcrStructure;

/// Mean `mu` and real covariance `sigma` of a Gaussian quantum state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        check_square(&sigma, n, "covariance")?;
        let asym = max_abs(&(&sigma - sigma.transpose()));
        if asym > 1e-12 * max_abs(&sigma).max(1.0) {
            return Err(Error::InvalidModel(format!(
                "covariance is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self {
            mu,
            sigma: symmetrize(&sigma),
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Smallest eigenvalue of `sigma + i theta`; nonnegative for physical states.
    pub fn heisenberg_min_eig(&self, ccr: &CcrStructure) -> f64 {
        min_eig_hermitian_parts(&self.sigma, ccr.theta())
    }

    pub fn is_physical(&self, ccr: &CcrStructure, tol: f64) -> bool {
        self.heisenberg_min_eig(ccr) >= -tol
    }
}

/// Gaussian quasi-characteristic function `exp(i mu^T u - ½ u^T sigma u)`.
pub fn gaussian_qcf(belief: &GaussianBelief, u: &[f64]) -> Result<Complex64> {
    let n = belief.dim();
    check_len(u, n, "gaussian_qcf")?;
    let mut lin = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        lin += belief.mu[i] * u[i];
        let mut row = 0.0;
        for j in 0..n {
            row += belief.sigma[(i, j)] * u[j];
        }
        quad += u[i] * row;
    }
    Ok(Complex64::from_polar((-0.5 * quad).exp(), lin))
}

/// Gaussian QPDF; requires `sigma` positive definite.
pub fn gaussian_qpdf(belief: &GaussianBelief, x: &[f64]) -> Result<f64> {
    GaussianDensity::new(belief)?.eval(x)
}

/// Gaussian QPDF with the Cholesky factor cached, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mu: DVector<f64>,
    chol_l: DMatrix<f64>,
    norm: f64,
}

impl GaussianDensity {
    pub fn new(belief: &GaussianBelief) -> Result<Self> {
        let n = belief.dim();
        let ch = belief.sigma.clone().cholesky().ok_or_else(|| {
            Error::Singular("Gaussian QPDF requires a positive definite covariance".into())
        })?;
        let l = ch.l();
        let det: f64 = l.diagonal().iter().map(|d| d * d).product();
        let norm = (2.0 * PI).powf(-(n as f64) / 2.0) / det.sqrt();
        Ok(Self {
            mu: belief.mu.clone(),
            chol_l: l,
            norm,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let n = self.mu.len();
        check_len(x, n, "gaussian_qpdf")?;
        // Forward substitution L y = x - mu, so that |y|^2 = (x-mu)^T sigma^{-1} (x-mu).
        let mut y = vec![0.0; n];
        let mut q = 0.0;
        for i in 0..n {
            let mut s = x[i] - self.mu[i];
            for (k, yk) in y.iter().enumerate().take(i) {
                s -= self.chol_l[(i, k)] * yk;
            }
            y[i] = s / self.chol_l[(i, i)];
            q += y[i] * y[i];
        }
        Ok(self.norm * (-0.5 * q).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn belief(mu: &[f64], sigma: &[f64]) -> GaussianBelief {
        let n = mu.len();
        GaussianBelief::new(
            DVector::from_row_slice(mu),
            DMatrix::from_row_slice(n, n, sigma),
        )
        .unwrap()
    }

    #[test]
    fn qcf_examples() {
        let b = belief(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            gaussian_qcf(&b, &[0.0, 0.0]).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        let v = gaussian_qcf(&b, &[1.0, 0.0]).unwrap();
        assert!((v.re - 0.6065306597126334).abs() < 1e-15 && v.im == 0.0);

        // exp(i - 1.5): mu^T u = 1, u^T sigma u = 3.
        let b = belief(&[1.0, 0.0], &[2.0, 0.0, 0.0, 1.0]);
        let v = gaussian_qcf(&b, &[1.0, 1.0]).unwrap();
        let expect = Complex64::new(-1.5, 1.0).exp();
        assert!((v - expect).norm() < 1e-15);
    }

    #[test]
    fn qpdf_examples() {
        let b = belief(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        assert!((gaussian_qpdf(&b, &[0.0, 0.0]).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let b = belief(&[0.0, 0.0], &[4.0, 0.0, 0.0, 1.0]);
        let expect = (-0.5f64).exp() / (4.0 * PI);
        assert!((gaussian_qpdf(&b, &[2.0, 0.0]).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn qpdf_singular_fails() {
        let b = belief(&[0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            gaussian_qpdf(&b, &[0.0, 0.0]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn qpdf_normalized_on_wide_grid() {
        let b = belief(&[0.4, -0.3], &[1.3, 0.4, 0.4, 0.7]);
        let h = 0.05;
        let mut total = 0.0;
        for i in -200..=200 {
            for j in -200..=200 {
                total += gaussian_qpdf(&b, &[i as f64 * h, j as f64 * h]).unwrap();
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-10);
    }

    #[test]
    fn heisenberg_check() {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        assert!(belief(&[0.0, 0.0], &[0.5, 0.0, 0.0, 0.5]).is_physical(&ccr, 1e-12));
        assert!(!belief(&[0.0, 0.0], &[0.1, 0.0, 0.0, 0.1]).is_physical(&ccr, 1e-9));
    }

    proptest! {
        #[test]
        fn qcf_is_hermitian(u0 in -4.0..4.0f64, u1 in -4.0..4.0f64, m0 in -2.0..2.0f64, s in 0.1..3.0f64) {
            let b = belief(&[m0, 0.5], &[s, 0.2, 0.2, 1.0]);
            let a = gaussian_qcf(&b, &[u0, u1]).unwrap();
            let c = gaussian_qcf(&b, &[-u0, -u1]).unwrap();
            prop_assert_eq!(a, c.conj());
        }
    }
}
