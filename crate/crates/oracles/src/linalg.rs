use nalgebra::{DMatrix, DVector};

/// `[[0, I], [-I, 0]]` of size `2k`.
pub fn block_j(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * k, 2 * k, |i, j| {
        if j == i + k {
            1.0
        } else if i == j + k {
            -1.0
        } else {
            0.0
        }
    })
}

fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Solves `Sigma^-1 s Sigma^-1 + ½ tr(Sigma^-1 s) Sigma^-1 = m` through the
/// dense `n^2 x n^2` matrix of the map.
pub fn dense_s_solve(sigma: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sigma.nrows();
    let inv = sigma.clone().try_inverse().expect("invertible covariance");
    let mut op = DMatrix::zeros(n * n, n * n);
    for c in 0..n * n {
        let mut basis = DMatrix::zeros(n, n);
        basis[(c % n, c / n)] = 1.0;
        let tr = (&inv * &basis).trace();
        let img = &inv * &basis * &inv + &inv * (0.5 * tr);
        op.set_column(c, &vec_of(&img));
    }
    let x = op.lu().solve(&vec_of(m)).expect("nonsingular operator");
    DMatrix::from_column_slice(n, n, x.as_slice())
}
