//! Commutation structure of the system variables and the Ito structure of
//! the driving boson fields.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_square, max_abs, min_eig_symmetric};

/// Default tolerance on the smallest singular value of `theta`.
pub const DEFAULT_SINGULARITY_TOL: f64 = 1e-12;

/// `[[0, 1], [-1, 0]] ⊗ I_{k/2}`.
pub fn canonical_symplectic(k: usize) -> DMatrix<f64> {
    let h = k / 2;
    let mut j = DMatrix::zeros(k, k);
    for i in 0..h {
        j[(i, h + i)] = 1.0;
        j[(h + i, i)] = -1.0;
    }
    j
}

/// Dimension `n` and antisymmetric nonsingular CCR matrix `theta`, so that
/// `[X, X^T] = 2 i theta` and `W_{u+v} = exp(i u^T theta v) W_u W_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrStructure {
    n: usize,
    theta: DMatrix<f64>,
}

impl CcrStructure {
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(theta, DEFAULT_SINGULARITY_TOL)
    }

    pub fn with_tolerance(theta: DMatrix<f64>, singular_tol: f64) -> Result<Self> {
        let n = theta.nrows();
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidCcr(format!(
                "n = {n} must be even and positive"
            )));
        }
        check_square(&theta, n, "CCR matrix")?;
        let asym = max_abs(&(&theta + theta.transpose()));
        if asym > 1e-14 * max_abs(&theta).max(1.0) {
            return Err(Error::InvalidCcr(format!(
                "theta is not antisymmetric (max |theta + theta^T| = {asym:e})"
            )));
        }
        // Singular values of theta are the square roots of the eigenvalues of theta^T theta.
        let smin = min_eig_symmetric(&(theta.transpose() * &theta))
            .max(0.0)
            .sqrt();
        if smin <= singular_tol {
            return Err(Error::InvalidCcr(format!(
                "theta is singular (smallest singular value {smin:e})"
            )));
        }
        Ok(Self { n, theta })
    }

    /// Position-momentum variables `X = (q, p)` with `hbar = 1`:
    /// `theta = ½ [[0, 1], [-1, 0]] ⊗ I_{n/2}`.
    pub fn position_momentum(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidCcr(format!(
                "n = {n} must be even and positive"
            )));
        }
        Self::new(canonical_symplectic(n) * 0.5)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// `u^T theta v`.
    pub fn symplectic_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            if u[i] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.theta[(i, j)] * v[j];
            }
            acc += u[i] * row;
        }
        acc
    }

    /// `theta v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.theta * v
    }
}

/// Composition phase `exp(i u^T theta v)` of the Weyl operators.
pub fn weyl_phase(ccr: &CcrStructure, u: &[f64], v: &[f64]) -> Result<Complex64> {
    check_len(u, ccr.n(), "weyl_phase u")?;
    check_len(v, ccr.n(), "weyl_phase v")?;
    Ok(Complex64::from_polar(1.0, ccr.symplectic_form(u, v)))
}

/// Number `m` of field channels, the matrix `J` and the Ito matrix
/// `Omega = I_m + i J` of the quantum Wiener processes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStructure {
    m: usize,
    j: DMatrix<f64>,
}

impl FieldStructure {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m % 2 != 0 {
            return Err(Error::InvalidField(format!(
                "m = {m} must be even and positive"
            )));
        }
        Ok(Self {
            m,
            j: canonical_symplectic(m),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn half(&self) -> usize {
        self.m / 2
    }

    pub fn j(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn omega(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.m, self.m, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, self.j[(r, c)])
        })
    }
}
