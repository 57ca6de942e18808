use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::e12;

/// A point mass `coef * delta(. - loc)` of a Fourier transform.
#[derive(Debug, Clone)]
pub struct Atom {
    pub coef: Complex64,
    pub loc: DVector<f64>,
}

fn form(theta: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (u.transpose() * theta * v)[(0, 0)]
}

/// `sin(u^T Theta v) I_m + cos(u^T Theta v) J`.
pub fn upsilon(
    theta: &DMatrix<f64>,
    j: &DMatrix<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> DMatrix<f64> {
    let a = form(theta, u, v);
    DMatrix::identity(j.nrows(), j.ncols()) * a.sin() + j * a.cos()
}

/// `integral V(u, v) phi(u + v) dv` for atomic `H_0` and `H`, enumerating
/// every atom and every ordered pair of atoms.
pub fn brute_a(
    theta: &DMatrix<f64>,
    j: &DMatrix<f64>,
    h0: &[Atom],
    h: &[Vec<Atom>],
    phi: &dyn Fn(&DVector<f64>) -> Complex64,
    u: &DVector<f64>,
) -> Complex64 {
    let m = j.nrows();
    let mut acc = Complex64::default();
    for a in h0 {
        acc += -2.0 * form(theta, u, &a.loc).sin() * a.coef * phi(&(u + &a.loc));
    }
    for (k, hk) in h.iter().enumerate() {
        for a in hk {
            for (l, hl) in h.iter().enumerate() {
                for b in hl {
                    let v = &a.loc + &b.loc;
                    let ups = upsilon(theta, j, &(u + &a.loc), &(&a.loc - &v));
                    let mut ek = DVector::zeros(m);
                    ek[k] = 1.0;
                    let mut el = DVector::zeros(m);
                    el[l] = 1.0;
                    let quad = (ek.transpose() * ups * el)[(0, 0)];
                    acc += -2.0
                        * form(theta, u, &a.loc).sin()
                        * a.coef
                        * b.coef
                        * quad
                        * phi(&(u + v));
                }
            }
        }
    }
    acc
}

/// `integral Gamma(u, v) phi(u + v) dv` for atomic `H`.
pub fn brute_c(
    theta: &DMatrix<f64>,
    e: &DMatrix<Complex64>,
    h: &[Vec<Atom>],
    phi: &dyn Fn(&DVector<f64>) -> Complex64,
    u: &DVector<f64>,
) -> DVector<Complex64> {
    let half = e.nrows();
    let (e1, e2) = e12(e);
    let cos_block = DMatrix::from_fn(half, 2 * half, |i, c| {
        if c < half {
            e2[(i, c)]
        } else {
            e1[(i, c - half)]
        }
    });
    let sin_block = DMatrix::from_fn(half, 2 * half, |i, c| {
        if c < half {
            -e1[(i, c)]
        } else {
            e2[(i, c - half)]
        }
    });
    let mut acc = DVector::from_element(half, Complex64::default());
    for (k, hk) in h.iter().enumerate() {
        for a in hk {
            let mut hv = DVector::zeros(2 * half);
            hv[k] = 1.0;
            let s = form(theta, u, &a.loc);
            let g = (&cos_block * s.cos() + &sin_block * s.sin()) * hv * 2.0;
            let p = phi(&(u + &a.loc));
            for i in 0..half {
                acc[i] += g[i] * a.coef * p;
            }
        }
    }
    acc
}
