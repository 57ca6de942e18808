//! Discrete QCF <-> QPDF transforms on centered grids.
//!
//! With `u_k = (k - c) du`, `x_j = (j - c) dx`, `c = N / 2` and
//! `du dx = 2 pi / N`, the phase `u_k x_j` splits into
//! `2 pi (kj - ck - cj + c^2) / N`, so each axis is an FFT bracketed by
//! diagonal phase factors.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::grid::{GridDomain, QcfGrid, QpdfGrid};
use crate::error::{Error, Result};

/// Hermitian defects above this are logged before symmetrization.
pub const HERMITIAN_WARN_TOL: f64 = 1e-8;

/// Diagnostics of a QCF -> QPDF transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformReport {
    /// Largest `|Im|` of the output before it was discarded.
    pub max_imag_residue: f64,
    /// Largest `|Phi(u) - conj(Phi(-u))|` of the input.
    pub hermitian_violation: f64,
    /// Riemann sum of the output.
    pub mass: f64,
}

fn unit(turns_num: usize, n: usize, sign: f64) -> Complex64 {
    Complex64::from_polar(1.0, sign * 2.0 * PI * (turns_num % n) as f64 / n as f64)
}

fn transform_axes(domain: &GridDomain, values: &mut [Complex64], direction: FftDirection) {
    let sign = match direction {
        FftDirection::Forward => 1.0,
        FftDirection::Inverse => -1.0,
    };
    let mut planner = FftPlanner::<f64>::new();
    for a in 0..domain.dim() {
        let n = domain.axis(a).len();
        let c = n / 2;
        let stride = domain.strides()[a];
        let fft = planner.plan_fft(n, direction);
        let pre: Vec<Complex64> = (0..n).map(|k| unit(c * k, n, sign)).collect();
        let post: Vec<Complex64> = (0..n)
            .map(|j| unit(c * j, n, sign) * unit(c * c, n, -sign))
            .collect();
        let mut line = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let block = stride * n;
        for base in (0..values.len()).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for k in 0..n {
                    line[k] = values[start + k * stride] * pre[k];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for j in 0..n {
                    values[start + j * stride] = line[j] * post[j];
                }
            }
        }
    }
}

fn require_centered(domain: &GridDomain) -> Result<()> {
    if !domain.is_centered() {
        return Err(Error::InvalidGrid(
            "Fourier transforms need the origin on a grid node".into(),
        ));
    }
    Ok(())
}

/// `(2 pi)^-n * integral Phi(u) exp(-i u.x) du` on the dual grid.
///
/// The input is symmetrized to exact discrete Hermitian form first; a
/// defect larger than [`HERMITIAN_WARN_TOL`] is logged and reported.
pub fn qcf_to_qpdf(qcf: &QcfGrid) -> Result<(QpdfGrid, TransformReport)> {
    let domain = &qcf.domain;
    require_centered(domain)?;
    let violation = qcf.hermitian_violation();
    if violation > HERMITIAN_WARN_TOL {
        log::warn!("QCF is not Hermitian (defect {violation:.3e}); symmetrizing before transform");
    }
    let mut sym = qcf.clone();
    sym.symmetrize();
    let mut values = sym.values;
    transform_axes(domain, &mut values, FftDirection::Forward);
    let scale = domain.cell_volume() / (2.0 * PI).powi(domain.dim() as i32);
    let mut max_imag = 0.0f64;
    let real: Vec<f64> = values
        .iter()
        .map(|v| {
            max_imag = max_imag.max((v.im * scale).abs());
            v.re * scale
        })
        .collect();
    let qpdf = QpdfGrid::new(domain.dual(), real)?;
    let report = TransformReport {
        max_imag_residue: max_imag,
        hermitian_violation: violation,
        mass: qpdf.mass(),
    };
    Ok((qpdf, report))
}

/// `integral mho(x) exp(i u.x) dx` on the dual grid.
pub fn qpdf_to_qcf(qpdf: &QpdfGrid) -> Result<QcfGrid> {
    let domain = &qpdf.domain;
    require_centered(domain)?;
    let mut values: Vec<Complex64> = qpdf
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    transform_axes(domain, &mut values, FftDirection::Inverse);
    let scale = domain.cell_volume();
    for v in &mut values {
        *v *= scale;
    }
    QcfGrid::new(domain.dual(), values)
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};

    use super::*;
    use crate::phase::gaussian::{gaussian_qcf, gaussian_qpdf, GaussianBelief};

    fn belief(mu: [f64; 2], s: [f64; 3]) -> GaussianBelief {
        GaussianBelief::new(
            DVector::from_row_slice(&mu),
            DMatrix::from_row_slice(2, 2, &[s[0], s[1], s[1], s[2]]),
        )
        .unwrap()
    }

    fn u_grid_for(x_half: f64, len: usize) -> GridDomain {
        GridDomain::cube(2, x_half, len).unwrap().dual()
    }

    #[test]
    fn gaussian_pair_matches_closed_form() {
        let b = belief([0.0, 0.0], [1.0, 0.0, 1.0]);
        let ug = u_grid_for(8.0, 128);
        let qcf = QcfGrid::from_fn(ug, |u| gaussian_qcf(&b, u).unwrap());
        let (qpdf, rep) = qcf_to_qpdf(&qcf).unwrap();
        assert!(rep.max_imag_residue < 1e-12);
        let mut err = 0.0f64;
        for k in 0..qpdf.values.len() {
            let x = qpdf.domain.point(k);
            err = err.max((qpdf.values[k] - gaussian_qpdf(&b, &x).unwrap()).abs());
        }
        assert!(err <= 1e-6, "{err}");
        assert!((qpdf.mass() - 1.0).abs() < 1e-10);
        assert!((qpdf.domain.axis(0).start() + 8.0).abs() < 1e-12);
    }

    #[test]
    fn unity_maps_to_discrete_delta() {
        let ug = u_grid_for(4.0, 32);
        let qcf = QcfGrid::from_fn(ug, |_| Complex64::new(1.0, 0.0));
        let (qpdf, _) = qcf_to_qpdf(&qcf).unwrap();
        let o = qpdf.domain.origin_index();
        let cell = qpdf.cell_volume();
        assert!((qpdf.values[o] * cell - 1.0).abs() < 1e-12);
        let off: f64 = qpdf
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != o)
            .map(|(_, v)| v.abs())
            .sum();
        assert!(off < 1e-10);
    }

    #[test]
    fn shifted_gaussian_peaks_at_mean() {
        let b = belief([1.0, 0.0], [0.3, 0.0, 0.3]);
        let qcf = QcfGrid::from_fn(u_grid_for(8.0, 128), |u| gaussian_qcf(&b, u).unwrap());
        let (qpdf, _) = qcf_to_qpdf(&qcf).unwrap();
        let (k, _) = qpdf
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let x = qpdf.domain.point(k);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn round_trip_is_identity() {
        let b = belief([0.4, -0.7], [1.2, 0.3, 0.8]);
        let qcf = QcfGrid::from_fn(u_grid_for(8.0, 64), |u| gaussian_qcf(&b, u).unwrap());
        let (qpdf, _) = qcf_to_qpdf(&qcf).unwrap();
        let back = qpdf_to_qcf(&qpdf).unwrap();
        let mut sym = qcf.clone();
        sym.symmetrize();
        let err = back
            .values
            .iter()
            .zip(&sym.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
        assert!((back.at_origin() - Complex64::new(qpdf.mass(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn even_density_gives_real_qcf() {
        let b = belief([0.0, 0.0], [1.0, 0.4, 2.0]);
        let qpdf = QpdfGrid::from_fn(GridDomain::cube(2, 14.0, 96).unwrap(), |x| {
            gaussian_qpdf(&b, x).unwrap()
        });
        let qcf = qpdf_to_qcf(&qpdf).unwrap();
        let imag = qcf.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(imag <= 1e-10, "{imag}");
    }

    #[test]
    fn odd_length_axes_work() {
        let b = belief([0.2, 0.0], [1.0, 0.0, 1.0]);
        let ug = GridDomain::cube(2, 8.0, 63).unwrap().dual();
        let qcf = QcfGrid::from_fn(ug, |u| gaussian_qcf(&b, u).unwrap());
        let (qpdf, _) = qcf_to_qpdf(&qcf).unwrap();
        let k = qpdf.domain.origin_index();
        assert!((qpdf.values[k] - gaussian_qpdf(&b, &[0.0, 0.0]).unwrap()).abs() < 1e-6);
    }
}
