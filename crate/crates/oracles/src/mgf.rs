use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `exp(¼ z^T Sigma^-1 z)`.
pub fn phi(sigma: &DMatrix<f64>, z: &DVector<Complex64>) -> Complex64 {
    let inv = sigma
        .clone()
        .try_inverse()
        .expect("invertible")
        .map(|x| Complex64::new(x, 0.0));
    ((z.transpose() * inv * z)[(0, 0)] * 0.25).exp()
}

fn bump(z: &DVector<Complex64>, i: usize, h: f64) -> DVector<Complex64> {
    let mut w = z.clone();
    w[i] += h;
    w
}

/// Central differences along real directions; `phi` is holomorphic, so this
/// is its complex gradient.
pub fn fd_grad(sigma: &DMatrix<f64>, z: &DVector<Complex64>, h: f64) -> DVector<Complex64> {
    DVector::from_fn(z.len(), |i, _| {
        (phi(sigma, &bump(z, i, h)) - phi(sigma, &bump(z, i, -h))) / (2.0 * h)
    })
}

/// Central second differences.
pub fn fd_hess(sigma: &DMatrix<f64>, z: &DVector<Complex64>, h: f64) -> DMatrix<Complex64> {
    let n = z.len();
    DMatrix::from_fn(n, n, |i, j| {
        let pp = phi(sigma, &bump(&bump(z, i, h), j, h));
        let pm = phi(sigma, &bump(&bump(z, i, h), j, -h));
        let mp = phi(sigma, &bump(&bump(z, i, -h), j, h));
        let mm = phi(sigma, &bump(&bump(z, i, -h), j, -h));
        (pp - pm - mp + mm) / (4.0 * h * h)
    })
}
