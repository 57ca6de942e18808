use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::block_j;

fn re(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

fn im(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.im)
}

fn side_by_side(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols() + b.ncols(), |i, j| {
        if j < a.ncols() {
            a[(i, j)]
        } else {
            b[(i, j - a.ncols())]
        }
    })
}

/// `F = [Re G  Im G]`.
pub fn f_matrix(g: &DMatrix<Complex64>) -> DMatrix<f64> {
    side_by_side(&re(g), &im(g))
}

/// Max entry of `[Re E  Im E] J [Re E  Im E]^T`.
pub fn isotropy_defect(e: &DMatrix<Complex64>) -> f64 {
    let f = side_by_side(&re(e), &im(e));
    (&f * block_j(e.ncols()) * f.transpose()).amax()
}

/// `[G; D]`.
pub fn stack(g: &DMatrix<Complex64>, d: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(g.nrows() + d.nrows(), g.ncols(), |i, j| {
        if i < g.nrows() {
            g[(i, j)]
        } else {
            d[(i - g.nrows(), j)]
        }
    })
}

/// `|det E|`.
pub fn det_abs(e: &DMatrix<Complex64>) -> f64 {
    e.clone().lu().determinant().norm()
}

/// `K = [I_r; (Re D Re G^T + Im D Im G^T)(F F^T)^-1]`.
pub fn k_matrix(g: &DMatrix<Complex64>, d: &DMatrix<Complex64>) -> DMatrix<f64> {
    let r = g.nrows();
    let f = f_matrix(g);
    let fft_inv = (&f * f.transpose()).try_inverse().expect("full row rank");
    let lower = (re(d) * re(g).transpose() + im(d) * im(g).transpose()) * fft_inv;
    DMatrix::from_fn(r + d.nrows(), r, |i, j| {
        if i < r {
            if i == j {
                1.0
            } else {
                0.0
            }
        } else {
            lower[(i - r, j)]
        }
    })
}

/// `(Re E^-T, Im E^-T)`.
pub fn e12(e: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let inv_t = e.clone().try_inverse().expect("nonsingular E").transpose();
    (re(&inv_t), im(&inv_t))
}
