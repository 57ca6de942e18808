//! Correction terms of the Gaussian approximation: the `L2`-optimal drift
//! of `(mu, Sigma)` for the non-quadratic part of the Hamiltonian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, min_eig_symmetric, spd_inverse, symmetrize};
use crate::linear::{GaussianBump, LinearCouplingModel};
use crate::phase::Mgf;
use crate::quadrature::TensorRule;

/// `Sigma^-1 s Sigma^-1 + ½ <Sigma^-1, s> Sigma^-1`.
pub fn s_sigma_apply(sigma: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = spd_inverse(sigma, "S_Sigma covariance")?;
    let t = frobenius_inner(&inv, s);
    Ok(symmetrize(&(&inv * s * &inv + &inv * (0.5 * t))))
}

/// Inverse of [`s_sigma_apply`]: `Sigma M Sigma - (t/2) Sigma` with
/// `t = tr(Sigma M) / (1 + n/2)`.
pub fn s_sigma_solve(sigma: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_inverse(sigma, "S_Sigma covariance")?;
    let n = sigma.nrows() as f64;
    let t = (sigma * m).trace() / (1.0 + n / 2.0);
    Ok(symmetrize(&(sigma * m * sigma - sigma * (0.5 * t))))
}

/// `E(xi xi^T s xi xi^T) = 2 C s C + <C, s> C` for `xi ~ N(0, C)`.
pub fn isserlis_fourth_moment(c: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(c * s * c * 2.0 + c * frobenius_inner(c, s)))
}

/// Drift corrections `(lambda, sigma)` with the quadrature error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTerms {
    pub lambda: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// Max-norm change between the base and the refined quadrature.
    pub quadrature_error: f64,
}

impl CorrectionTerms {
    pub fn zero(n: usize) -> Self {
        Self {
            lambda: DVector::zeros(n),
            sigma: DMatrix::zeros(n, n),
            quadrature_error: 0.0,
        }
    }
}

/// Quadrature error above which [`correction_terms`] logs a warning.
pub const QUADRATURE_WARN_TOL: f64 = 1e-8;

/// Gauss–Legendre settings for the `v`-integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionQuadrature {
    pub order: usize,
    /// Half-width of each bump's box in units of its width.
    pub box_widths: f64,
    /// Minimum number of panels per axis.
    pub min_panels: usize,
}

impl Default for CorrectionQuadrature {
    fn default() -> Self {
        Self {
            order: 20,
            box_widths: 7.5,
            min_panels: 2,
        }
    }
}

/// Evaluates `lambda = Re X`, `sigma = 2 S_Sigma^-1(Im Y)` with
/// `X = integral [phi(z) z]`, `Y = integral [phi(z)(Sigma^-1 + ½ Sigma^-1 z z^T Sigma^-1)]`,
/// each bracket taken between `z = -(Sigma + i Theta) S^T v` and
/// `z = (-Sigma + i Theta) S^T v` and weighted by `Phi(S^T v) Psi(v)`.
pub fn correction_terms(
    model: &LinearCouplingModel,
    belief: &crate::phase::GaussianBelief,
) -> Result<CorrectionTerms> {
    correction_terms_with(model, belief, CorrectionQuadrature::default())
}

pub fn correction_terms_with(
    model: &LinearCouplingModel,
    belief: &crate::phase::GaussianBelief,
    quad: CorrectionQuadrature,
) -> Result<CorrectionTerms> {
    let n = model.n();
    if model.psi.is_zero() {
        return Ok(CorrectionTerms::zero(n));
    }
    let min_eig = min_eig_symmetric(&belief.sigma);
    if !(min_eig > 0.0) {
        return Err(Error::NotPositiveDefinite {
            context: "covariance for correction terms".into(),
            min_eig,
        });
    }
    let coarse = integrate(model, belief, quad, 1)?;
    let fine = integrate(model, belief, quad, 2)?;
    let err = (&fine.0 - &coarse.0)
        .amax()
        .max((&fine.1 - &coarse.1).amax());
    if err > QUADRATURE_WARN_TOL {
        log::warn!("correction-term quadrature changed by {err:e} under refinement");
    }
    let lambda = fine.0;
    let sigma = s_sigma_solve(&belief.sigma, &fine.1)? * 2.0;
    Ok(CorrectionTerms {
        lambda,
        sigma,
        quadrature_error: err,
    })
}

/// Returns `(Re X, Im Y)`.
fn integrate(
    model: &LinearCouplingModel,
    belief: &crate::phase::GaussianBelief,
    quad: CorrectionQuadrature,
    refine: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = model.n();
    let sigma = &belief.sigma;
    let mgf = Mgf::new(sigma)?;
    let sinv = mgf.sigma_inv().clone();
    let theta = model.theta();
    let i = Complex64::new(0.0, 1.0);
    let sc = sigma.map(|v| Complex64::new(v, 0.0));
    let tc = theta.map(|v| Complex64::new(v, 0.0));
    let z_plus_map = -&sc + &tc * i;
    let z_minus_map = -(&sc + &tc * i);
    let mut x = DVector::<Complex64>::zeros(n);
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    let half = Complex64::new(0.5, 0.0);
    for bump in model.psi.terms() {
        let rule = bump_rule(model, belief, bump, quad, refine);
        for (v, w) in rule.iter() {
            let s_v = DVector::from_vec(model.selector.lift(v));
            let weight = crate::phase::gaussian_qcf(belief, s_v.as_slice())? * bump.eval(v) * w;
            if weight == Complex64::default() {
                continue;
            }
            let svc = s_v.map(|t| Complex64::new(t, 0.0));
            for (sign, map) in [(1.0, &z_plus_map), (-1.0, &z_minus_map)] {
                let z = map * &svc;
                let phi = mgf.phi(&z);
                let f = weight * phi * sign;
                x += &z * f;
                let sz = &sinv * &z;
                y += (&sinv + &sz * sz.transpose() * half) * f;
            }
        }
    }
    let re_x = x.map(|c| c.re);
    let im_y = symmetrize(&y.map(|c| c.im));
    Ok((re_x, im_y))
}

/// Tensor rule over the part of `center ± box_widths * width` where the
/// Gaussian envelope `Phi(S^T v) phi(z)` is not negligible.
fn bump_rule(
    model: &LinearCouplingModel,
    belief: &crate::phase::GaussianBelief,
    bump: &GaussianBump,
    quad: CorrectionQuadrature,
    refine: usize,
) -> TensorRule {
    let d = bump.center.len();
    let sel = model.selector.indices();
    let m = model.selector.matrix();
    let minv = (&m * &belief.sigma * m.transpose())
        .try_inverse()
        .unwrap_or_else(|| DMatrix::identity(d, d));
    let mut rules = Vec::with_capacity(d);
    for a in 0..d {
        let k = sel[a];
        // |Phi(S^T v) phi(z)| <= exp(-v^T S Sigma S^T v / 4), and with v_a
        // fixed the exponent is at least v_a^2 / (4 [(S Sigma S^T)^-1]_aa).
        let env = (4.0 * 28.0 * minv[(a, a)]).sqrt();
        let lo = (bump.center[a] - quad.box_widths * bump.width).max(-env);
        let hi = (bump.center[a] + quad.box_widths * bump.width).min(env);
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (bump.center[a], bump.center[a])
        };
        let scale = bump.width.min(minv[(a, a)].sqrt());
        let freq = belief.mu[k].abs() + 1.0;
        let panels = ((hi - lo) / scale).max((hi - lo) * freq / 3.0).ceil() as usize;
        let panels = panels.clamp(quad.min_panels, 256) * refine;
        rules.push(crate::quadrature::Rule1d::new(lo, hi, quad.order, panels));
    }
    TensorRule::new(&rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_case() {
        let s = s_sigma_solve(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2)).unwrap();
        assert!((s - DMatrix::identity(2, 2) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn isserlis_identity_case() {
        let m = isserlis_fourth_moment(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2));
        assert_eq!(m, DMatrix::identity(2, 2) * 4.0);
        assert_eq!(
            isserlis_fourth_moment(&DMatrix::identity(2, 2), &DMatrix::zeros(2, 2)),
            DMatrix::zeros(2, 2)
        );
    }

    #[test]
    fn zero_psi_gives_zero_terms() {
        let model = LinearCouplingModel::damped_oscillator(1.0, 0.3).unwrap();
        let b = crate::phase::GaussianBelief::new(
            DVector::from_vec(vec![0.1, 0.2]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let c = correction_terms(&model, &b).unwrap();
        assert_eq!(c, CorrectionTerms::zero(2));
    }
}
