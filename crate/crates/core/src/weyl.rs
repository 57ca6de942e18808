//! Kernels of the posterior QCF equation for Hamiltonians and couplings that
//! are finite combinations of Weyl operators.
//!
//! With `H_k = sum_j c_kj delta(. - w_kj)` every integral over `v` and `w`
//! collapses to a finite sum of shifts, so the drift is
//! `A(phi)(u) = sum_t weight_t(u) phi(u + shift_t)` and likewise for `C`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
pub use crate::measurement::Increment;
use crate::measurement::{e_blocks, MeasurementChannel};
use crate::phase::{CcrStructure, FieldStructure, QcfEval, QcfGrid, ShiftStencil};

/// Relative tolerance when matching Hermitian partner atoms.
pub const PAIRING_TOL: f64 = 1e-12;

/// `c W_u` as a term of a Weyl quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylAtom {
    pub coef: Complex64,
    pub loc: Vec<f64>,
}

impl WeylAtom {
    pub fn new(coef: Complex64, loc: Vec<f64>) -> Self {
        Self { coef, loc }
    }
}

/// Finite sum of Weyl atoms; self-adjoint when atoms come in pairs
/// `(c, u)`, `(conj c, -u)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeylAtomOperator {
    pub atoms: Vec<WeylAtom>,
}

impl WeylAtomOperator {
    pub fn new(atoms: Vec<WeylAtom>) -> Self {
        Self { atoms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `(c/2, v)` and `(conj(c)/2, -v)`: the Weyl form of `Re(c) cos(v.X) - Im(c) sin(v.X)`.
    pub fn cosine_pair(coef: Complex64, v: Vec<f64>) -> Self {
        let neg = v.iter().map(|x| -x).collect();
        Self::new(vec![
            WeylAtom::new(coef * 0.5, v),
            WeylAtom::new(coef.conj() * 0.5, neg),
        ])
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Checks dimensions, finiteness, an optional radius bound and the
    /// Hermitian pairing of the aggregated coefficients.
    pub fn validate(&self, n: usize, radius: Option<f64>) -> Result<()> {
        for a in &self.atoms {
            if a.loc.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "Weyl atom location",
                    expected: n,
                    found: a.loc.len(),
                });
            }
            if !a.coef.is_finite() || a.loc.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("Weyl atom".into()));
            }
            if let Some(r) = radius {
                let norm = a.loc.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > r {
                    return Err(Error::InvalidModel(format!(
                        "atom at distance {norm} exceeds radius {r}"
                    )));
                }
            }
        }
        let groups = self.aggregated();
        let scale = groups
            .iter()
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
            .max(1.0);
        for (loc, c) in &groups {
            let neg: Vec<f64> = loc.iter().map(|x| -x).collect();
            let partner = groups
                .iter()
                .find(|(l, _)| same_loc(l, &neg))
                .map_or(Complex64::default(), |(_, c)| *c);
            if (partner - c.conj()).norm() > PAIRING_TOL * scale {
                return Err(Error::PairingViolation(format!(
                    "atom {c} at {loc:?} has partner coefficient {partner} at the mirrored location"
                )));
            }
        }
        Ok(())
    }

    /// Coefficients summed over coincident locations.
    fn aggregated(&self) -> Vec<(Vec<f64>, Complex64)> {
        let mut groups: Vec<(Vec<f64>, Complex64)> = Vec::new();
        for a in &self.atoms {
            match groups.iter_mut().find(|(l, _)| same_loc(l, &a.loc)) {
                Some((_, c)) => *c += a.coef,
                None => groups.push((a.loc.clone(), a.coef)),
            }
        }
        groups
    }

    /// The classical symbol `sum_j c_j exp(i w_j.x)`.
    pub fn symbol(&self, x: &[f64]) -> Complex64 {
        self.atoms
            .iter()
            .map(|a| a.coef * Complex64::from_polar(1.0, dot(&a.loc, x)))
            .sum()
    }
}

fn same_loc(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= PAIRING_TOL * (1.0 + x.abs().max(y.abs())))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sin(u.Theta v) I_m + cos(u.Theta v) J`.
pub fn ups(
    ccr: &CcrStructure,
    field: &FieldStructure,
    u: &[f64],
    v: &[f64],
) -> Result<DMatrix<f64>> {
    if u.len() != ccr.n() || v.len() != ccr.n() {
        return Err(Error::DimensionMismatch {
            context: "ups arguments",
            expected: ccr.n(),
            found: u.len().min(v.len()),
        });
    }
    let a = ccr.symplectic_form(u, v);
    Ok(DMatrix::identity(field.m(), field.m()) * a.sin() + field.j() * a.cos())
}

/// Factor `s sin(u.dir + phase) + c cos(u.dir + phase)` coming from one
/// entry of the matrix `ups`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub dir: Vec<f64>,
    pub phase: f64,
    pub sin_coef: f64,
    pub cos_coef: f64,
}

/// `weight(u) = coef sin(u.sin_dir) [rotation(u)]`, applied at `u + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftTerm {
    pub shift: Vec<f64>,
    pub coef: Complex64,
    pub sin_dir: Vec<f64>,
    pub rotation: Option<Rotation>,
}

impl DriftTerm {
    pub fn weight(&self, u: &[f64]) -> Complex64 {
        let mut w = self.coef * dot(u, &self.sin_dir).sin();
        if let Some(r) = &self.rotation {
            let a = dot(u, &r.dir) + r.phase;
            w *= r.sin_coef * a.sin() + r.cos_coef * a.cos();
        }
        w
    }

    /// Upper bound of `|weight|`.
    pub fn bound(&self) -> f64 {
        let rot = self
            .rotation
            .as_ref()
            .map_or(1.0, |r| r.sin_coef.hypot(r.cos_coef));
        self.coef.norm() * rot
    }
}

/// Term list of the drift operator `A`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftKernel {
    pub n: usize,
    pub terms: Vec<DriftTerm>,
}

impl DriftKernel {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `sup_u sum_t |weight_t(u)|` bound.
    pub fn weight_bound(&self) -> f64 {
        self.terms.iter().map(DriftTerm::bound).sum()
    }
}

/// Builds the drift terms for `h0` and the coupling vector `h` (one atom
/// operator per field channel).
pub fn build_drift_kernel(
    h0: &WeylAtomOperator,
    h: &[WeylAtomOperator],
    ccr: &CcrStructure,
    field: &FieldStructure,
) -> Result<DriftKernel> {
    let n = ccr.n();
    let m = field.m();
    if !h.is_empty() && h.len() != m {
        return Err(Error::DimensionMismatch {
            context: "coupling channels",
            expected: m,
            found: h.len(),
        });
    }
    h0.validate(n, None)?;
    for hk in h {
        hk.validate(n, None)?;
    }
    let theta = ccr.theta();
    let th = |v: &[f64]| -> Vec<f64> {
        (theta * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    };
    let mut terms = Vec::new();
    for a in &h0.atoms {
        terms.push(DriftTerm {
            shift: a.loc.clone(),
            coef: a.coef * -2.0,
            sin_dir: th(&a.loc),
            rotation: None,
        });
    }
    let j = field.j();
    for (k, hk) in h.iter().enumerate() {
        for a in &hk.atoms {
            let theta_a = th(&a.loc);
            for (l, hl) in h.iter().enumerate() {
                let delta = if k == l { 1.0 } else { 0.0 };
                let jkl = j[(k, l)];
                if delta == 0.0 && jkl == 0.0 {
                    continue;
                }
                for b in &hl.atoms {
                    let theta_b = th(&b.loc);
                    // ups(u + a, -b) has angle -u.Theta b - a.Theta b.
                    let phase = -dot(&a.loc, &theta_b);
                    let dir = theta_b.iter().map(|x| -x).collect();
                    let shift = a.loc.iter().zip(&b.loc).map(|(x, y)| x + y).collect();
                    terms.push(DriftTerm {
                        shift,
                        coef: a.coef * b.coef * -2.0,
                        sin_dir: theta_a.clone(),
                        rotation: Some(Rotation {
                            dir,
                            phase,
                            sin_coef: delta,
                            cos_coef: jkl,
                        }),
                    });
                }
            }
        }
    }
    Ok(DriftKernel { n, terms })
}

/// `A(phi)(u)`.
pub fn apply_a<Q: QcfEval + ?Sized>(kernel: &DriftKernel, phi: &Q, u: &[f64]) -> Result<Complex64> {
    let mut acc = Complex64::default();
    let mut p = vec![0.0; u.len()];
    for t in &kernel.terms {
        for (i, x) in p.iter_mut().enumerate() {
            *x = u[i] + t.shift[i];
        }
        acc += t.weight(u) * phi.eval(&p).ok_or(Error::OutsideDomain)?;
    }
    Ok(acc)
}

/// `c (cos(u.dir) cos_vec + sin(u.dir) sin_vec)`, applied at `u + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTerm {
    pub shift: Vec<f64>,
    pub coef: Complex64,
    pub dir: Vec<f64>,
    pub cos_vec: DVector<f64>,
    pub sin_vec: DVector<f64>,
}

impl GammaTerm {
    pub fn weight(&self, u: &[f64]) -> DVector<Complex64> {
        let (s, c) = dot(u, &self.dir).sin_cos();
        (&self.cos_vec * c + &self.sin_vec * s).map(|x| self.coef * x)
    }
}

/// Term list of the operator `C` (values in `C^{m/2}`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GammaKernel {
    pub n: usize,
    pub half: usize,
    pub terms: Vec<GammaTerm>,
}

impl GammaKernel {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn weight_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef.norm() * (t.cos_vec.norm_squared() + t.sin_vec.norm_squared()).sqrt())
            .sum()
    }
}

/// Builds `C` from the coupling atoms and the channel matrices `E1`, `E2`.
pub fn build_gamma(
    h: &[WeylAtomOperator],
    channel: &MeasurementChannel,
    ccr: &CcrStructure,
) -> Result<GammaKernel> {
    let n = ccr.n();
    let half = channel.half();
    if !h.is_empty() && h.len() != 2 * half {
        return Err(Error::DimensionMismatch {
            context: "coupling channels",
            expected: 2 * half,
            found: h.len(),
        });
    }
    let (e21, me12) = e_blocks(&channel.e1, &channel.e2);
    let theta = ccr.theta();
    let mut terms = Vec::new();
    for (k, hk) in h.iter().enumerate() {
        hk.validate(n, None)?;
        let cos_vec = e21.column(k) * 2.0;
        let sin_vec = me12.column(k) * 2.0;
        for a in &hk.atoms {
            let dir = (theta * DVector::from_column_slice(&a.loc))
                .iter()
                .copied()
                .collect();
            terms.push(GammaTerm {
                shift: a.loc.clone(),
                coef: a.coef,
                dir,
                cos_vec: cos_vec.clone(),
                sin_vec: sin_vec.clone(),
            });
        }
    }
    Ok(GammaKernel { n, half, terms })
}

/// `C(phi)(u)`.
pub fn apply_c<Q: QcfEval + ?Sized>(
    kernel: &GammaKernel,
    phi: &Q,
    u: &[f64],
) -> Result<DVector<Complex64>> {
    let mut acc = DVector::zeros(kernel.half);
    let mut p = vec![0.0; u.len()];
    for t in &kernel.terms {
        for (i, x) in p.iter_mut().enumerate() {
            *x = u[i] + t.shift[i];
        }
        let v = phi.eval(&p).ok_or(Error::OutsideDomain)?;
        acc += t.weight(u) * v;
    }
    Ok(acc)
}

/// `B(phi)(u) = C(phi)(u) - phi(u) C(phi)(0)`.
pub fn apply_b<Q: QcfEval + ?Sized>(
    kernel: &GammaKernel,
    phi: &Q,
    u: &[f64],
) -> Result<DVector<Complex64>> {
    let zero = vec![0.0; u.len()];
    let c0 = apply_c(kernel, phi, &zero)?;
    let pu = phi.eval(u).ok_or(Error::OutsideDomain)?;
    Ok(apply_c(kernel, phi, u)? - c0 * pu)
}

/// `A(Phi)` on every node of a grid, shifts resolved by multilinear
/// interpolation with zero extension.
pub fn apply_a_grid(kernel: &DriftKernel, phi: &QcfGrid) -> Vec<Complex64> {
    let dom = &phi.domain;
    let coords = dom.coordinates();
    let d = dom.dim();
    let parts: Vec<Vec<Complex64>> = kernel
        .terms
        .par_iter()
        .map(|t| {
            let (shifted, _) = ShiftStencil::new(dom, &t.shift).apply(dom, &phi.values);
            shifted
                .iter()
                .zip(coords.chunks(d))
                .map(|(v, u)| t.weight(u) * v)
                .collect()
        })
        .collect();
    sum_fields(dom.size(), &parts)
}

/// `C(Phi)` on every node, one field per component.
pub fn apply_c_grid(kernel: &GammaKernel, phi: &QcfGrid) -> Vec<Vec<Complex64>> {
    let dom = &phi.domain;
    let coords = dom.coordinates();
    let d = dom.dim();
    let per_term: Vec<Vec<Vec<Complex64>>> = kernel
        .terms
        .par_iter()
        .map(|t| {
            let (shifted, _) = ShiftStencil::new(dom, &t.shift).apply(dom, &phi.values);
            let mut comps = vec![vec![Complex64::default(); dom.size()]; kernel.half];
            for (p, (v, u)) in shifted.iter().zip(coords.chunks(d)).enumerate() {
                let w = t.weight(u);
                for j in 0..kernel.half {
                    comps[j][p] = w[j] * v;
                }
            }
            comps
        })
        .collect();
    (0..kernel.half)
        .map(|j| {
            let fields: Vec<Vec<Complex64>> = per_term.iter().map(|c| c[j].clone()).collect();
            sum_fields(dom.size(), &fields)
        })
        .collect()
}

/// Term-ordered sum, so results do not depend on thread scheduling.
fn sum_fields(size: usize, parts: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); size];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// Diagnostics of one QCF step.
#[derive(Debug, Clone, PartialEq)]
pub struct QcfStepInfo {
    pub d_chi: Option<DVector<f64>>,
    pub origin_drift: f64,
    pub hermitian_violation: f64,
}

/// One Euler–Maruyama step `Phi += A(Phi) dt + B(Phi)^T K dChi` on a grid.
pub fn qcf_side_step(
    phi: &QcfGrid,
    drift: &DriftKernel,
    gamma: &GammaKernel,
    channel: Option<&MeasurementChannel>,
    increment: Increment<'_>,
    dt: f64,
) -> Result<(QcfGrid, QcfStepInfo)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidModel(format!(
            "time step {dt} must be positive"
        )));
    }
    let bound = drift.weight_bound();
    if bound > 0.0 && dt > 0.1 / bound {
        return Err(Error::StepTooLarge {
            dt,
            suggested: 0.1 / bound,
        });
    }
    let a = apply_a_grid(drift, phi);
    let mut values: Vec<Complex64> = phi.values.iter().zip(&a).map(|(p, a)| p + a * dt).collect();
    let mut d_chi_out = None;
    if !matches!(increment, Increment::None) && !gamma.is_empty() {
        let ch = channel
            .ok_or_else(|| Error::InvalidModel("measurement step needs a channel".into()))?;
        let c = apply_c_grid(gamma, phi);
        let o = phi.domain.origin_index();
        let c0 = DVector::from_iterator(gamma.half, c.iter().map(|f| f[o]));
        let d_chi = match increment {
            Increment::Innovation(x) => x.clone(),
            Increment::Record(dz) => dz - &ch.fft * ch.k_gain.transpose() * c0.map(|z| z.re) * dt,
            Increment::None => unreachable!(),
        };
        let kd = &ch.k_gain * &d_chi;
        for (p, v) in values.iter_mut().enumerate() {
            let phi_p = phi.values[p];
            for j in 0..gamma.half {
                *v += (c[j][p] - phi_p * c0[j]) * kd[j];
            }
        }
        d_chi_out = Some(d_chi);
    } else if let Increment::Innovation(x) = increment {
        d_chi_out = Some(x.clone());
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("QCF step".into()));
    }
    let out = QcfGrid::new(phi.domain.clone(), values)?;
    let info = QcfStepInfo {
        d_chi: d_chi_out,
        origin_drift: (out.at_origin() - phi.at_origin()).norm(),
        hermitian_violation: out.hermitian_violation(),
    };
    Ok((out, info))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::phase::{FnQcf, GaussianBelief, GridDomain};

    fn pm() -> (CcrStructure, FieldStructure) {
        (
            CcrStructure::position_momentum(2).unwrap(),
            FieldStructure::new(2).unwrap(),
        )
    }

    #[test]
    fn ups_examples() {
        let (ccr, field) = pm();
        assert_eq!(
            ups(&ccr, &field, &[0.0, 0.0], &[1.0, 2.0]).unwrap(),
            field.j().clone()
        );
        // u.Theta v = ½ u1 v2 for these vectors.
        let u = ups(&ccr, &field, &[FRAC_PI_2 * 2.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((u - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn pairing_is_enforced() {
        let bad = WeylAtomOperator::new(vec![WeylAtom::new(
            Complex64::new(1.0, 0.5),
            vec![1.0, 0.0],
        )]);
        assert!(matches!(
            bad.validate(2, None),
            Err(Error::PairingViolation(_))
        ));
        let ok = WeylAtomOperator::cosine_pair(Complex64::new(1.0, 0.5), vec![1.0, 0.0]);
        ok.validate(2, None).unwrap();
        let x = [0.3, -1.0];
        assert!(ok.symbol(&x).im.abs() < 1e-15);
    }

    #[test]
    fn empty_models_give_empty_kernels() {
        let (ccr, field) = pm();
        let k = build_drift_kernel(&WeylAtomOperator::zero(), &[], &ccr, &field).unwrap();
        assert!(k.is_empty());
        let phi = FnQcf::new(2, |_| Complex64::new(1.0, 0.0));
        assert_eq!(
            apply_a(&k, &phi, &[0.3, 0.1]).unwrap(),
            Complex64::default()
        );
    }

    #[test]
    fn drift_vanishes_at_origin() {
        let (ccr, field) = pm();
        let h0 = WeylAtomOperator::cosine_pair(Complex64::new(0.7, 0.2), vec![0.5, -0.3]);
        let h = vec![
            WeylAtomOperator::cosine_pair(Complex64::new(0.4, 0.0), vec![0.2, 0.1]),
            WeylAtomOperator::cosine_pair(Complex64::new(0.1, -0.3), vec![-0.4, 0.6]),
        ];
        let k = build_drift_kernel(&h0, &h, &ccr, &field).unwrap();
        let b = GaussianBelief::new(DVector::from_vec(vec![0.2, 0.1]), DMatrix::identity(2, 2))
            .unwrap();
        assert_eq!(apply_a(&k, &b, &[0.0, 0.0]).unwrap(), Complex64::default());
    }

    #[test]
    fn moyal_step_on_grid_keeps_normalization() {
        let (ccr, field) = pm();
        let h0 = WeylAtomOperator::cosine_pair(Complex64::new(1.0, 0.0), vec![0.5, 0.25]);
        let k = build_drift_kernel(&h0, &[], &ccr, &field).unwrap();
        let b = GaussianBelief::new(DVector::from_vec(vec![0.2, 0.1]), DMatrix::identity(2, 2))
            .unwrap();
        let dom = GridDomain::cube(2, 6.0, 48).unwrap();
        let phi = QcfGrid::from_fn(dom, |u| crate::phase::gaussian_qcf(&b, u).unwrap());
        let (out, info) = qcf_side_step(
            &phi,
            &k,
            &GammaKernel::default(),
            None,
            Increment::None,
            1e-3,
        )
        .unwrap();
        assert_eq!(out.at_origin(), phi.at_origin());
        assert!(info.hermitian_violation < 1e-10);
    }
}
