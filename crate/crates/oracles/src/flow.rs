use nalgebra::{DMatrix, DVector};

/// Exact moments of `dX = A X dt + B dW` with `B B^T = q` after time `t`,
/// by Van Loan's block exponential.
pub fn gaussian_flow(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    mu0: &DVector<f64>,
    sigma0: &DMatrix<f64>,
    t: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(-a));
    big.view_mut((0, n), (n, n)).copy_from(q);
    big.view_mut((n, n), (n, n)).copy_from(&a.transpose());
    let e = (big * t).exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let w = &phi * e.view((0, n), (n, n));
    let sigma = &phi * sigma0 * phi.transpose() + w;
    (&phi * mu0, (&sigma + sigma.transpose()) * 0.5)
}

/// Density of `N(mu, sigma)` at `x`.
pub fn gaussian_density(mu: &DVector<f64>, sigma: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let n = mu.len() as f64;
    let inv = sigma.clone().try_inverse().expect("invertible");
    let d = x - mu;
    let q = (d.transpose() * inv * &d)[(0, 0)];
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powf(n / 2.0) * sigma.determinant().sqrt())
}
