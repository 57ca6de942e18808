//! Linear system-field coupling `h = N X` with Hamiltonian
//! `½ X^T R X + integral Psi(v) W_{S^T v} dv`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{check_len, check_square, max_abs};
use crate::phase::{CcrStructure, FieldStructure};

const PAIRING_TOL: f64 = 1e-12;

/// `amp exp(-|v - center|^2 / (2 width^2))` (unnormalized).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBump {
    pub amp: Complex64,
    pub center: Vec<f64>,
    pub width: f64,
}

impl GaussianBump {
    pub fn eval(&self, v: &[f64]) -> Complex64 {
        let r2: f64 = v
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.amp * (-r2 / (2.0 * self.width * self.width)).exp()
    }

    /// `integral bump(v) exp(i v.q) dv`.
    pub fn fourier(&self, q: &[f64]) -> Complex64 {
        let d = q.len() as i32;
        let s2 = self.width * self.width;
        let q2: f64 = q.iter().map(|x| x * x).sum();
        let bq: f64 = q.iter().zip(&self.center).map(|(a, b)| a * b).sum();
        self.amp
            * (2.0 * PI * s2).powf(d as f64 / 2.0)
            * (-s2 * q2 / 2.0).exp()
            * Complex64::from_polar(1.0, bq)
    }
}

/// `Psi: R^d -> C` as a sum of Gaussian bumps closed under
/// `(a, b, s) -> (conj a, -b, s)`, so that `Psi(-v) = conj Psi(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianGaussianMixture {
    d: usize,
    terms: Vec<GaussianBump>,
}

impl HermitianGaussianMixture {
    pub fn new(d: usize, terms: Vec<GaussianBump>) -> Result<Self> {
        for t in &terms {
            check_len(&t.center, d, "bump center")?;
            if !(t.width > 0.0) || !t.width.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "bump width {} must be positive",
                    t.width
                )));
            }
            if !t.amp.is_finite() || t.center.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("bump parameters".into()));
            }
        }
        let mix = Self { d, terms };
        mix.check_pairing()?;
        Ok(mix)
    }

    pub fn zero(d: usize) -> Self {
        Self {
            d,
            terms: Vec::new(),
        }
    }

    /// The pair `(a, b, s)`, `(conj a, -b, s)`.
    pub fn paired(amp: Complex64, center: Vec<f64>, width: f64) -> Result<Self> {
        let d = center.len();
        let neg = center.iter().map(|x| -x).collect();
        Self::new(
            d,
            vec![
                GaussianBump { amp, center, width },
                GaussianBump {
                    amp: amp.conj(),
                    center: neg,
                    width,
                },
            ],
        )
    }

    fn check_pairing(&self) -> Result<()> {
        let close = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= PAIRING_TOL * (1.0 + x.abs()))
        };
        let scale = self.terms.iter().map(|t| t.amp.norm()).fold(1.0, f64::max);
        for t in &self.terms {
            let neg: Vec<f64> = t.center.iter().map(|x| -x).collect();
            let same: Complex64 = self
                .terms
                .iter()
                .filter(|o| {
                    close(&o.center, &t.center)
                        && (o.width - t.width).abs() <= PAIRING_TOL * t.width
                })
                .map(|o| o.amp)
                .sum();
            let mirror: Complex64 = self
                .terms
                .iter()
                .filter(|o| {
                    close(&o.center, &neg) && (o.width - t.width).abs() <= PAIRING_TOL * t.width
                })
                .map(|o| o.amp)
                .sum();
            if (mirror - same.conj()).norm() > PAIRING_TOL * scale {
                return Err(Error::PairingViolation(format!(
                    "bump at {:?} (width {}) lacks a conjugate partner at the mirrored center",
                    t.center, t.width
                )));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[GaussianBump] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, v: &[f64]) -> Complex64 {
        self.terms.iter().map(|t| t.eval(v)).sum()
    }

    /// `integral Psi(v) exp(i v.q) dv`, complex as computed.
    pub fn potential_complex(&self, q: &[f64]) -> Complex64 {
        self.terms.iter().map(|t| t.fourier(q)).sum()
    }

    /// The non-quadratic potential energy; real by pairing.
    pub fn potential(&self, q: &[f64]) -> f64 {
        self.potential_complex(q).re
    }
}

pub fn psi_eval(psi: &HermitianGaussianMixture, v: &[f64]) -> Complex64 {
    psi.eval(v)
}

pub fn potential_eval(psi: &HermitianGaussianMixture, q: &[f64]) -> f64 {
    psi.potential(q)
}

/// `Re Psi(v) sin(v.Sx) + Im Psi(v) cos(v.Sx)`.
pub fn xi_kernel(psi: &HermitianGaussianMixture, selector: &Selector, x: &[f64], v: &[f64]) -> f64 {
    let p = psi.eval(v);
    let a: f64 = v
        .iter()
        .zip(selector.indices())
        .map(|(vi, &k)| vi * x[k])
        .sum();
    let (s, c) = a.sin_cos();
    p.re * s + p.im * c
}

/// `S` stored as the list of selected variables, so `S S^T = I_d` holds by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    n: usize,
    idx: Vec<usize>,
}

impl Selector {
    pub fn new(n: usize, idx: Vec<usize>) -> Result<Self> {
        for (i, &k) in idx.iter().enumerate() {
            if k >= n {
                return Err(Error::InvalidModel(format!(
                    "selector index {k} out of range for n = {n}"
                )));
            }
            if idx[..i].contains(&k) {
                return Err(Error::InvalidModel(format!("selector index {k} repeated")));
            }
        }
        Ok(Self { n, idx })
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn d(&self) -> usize {
        self.idx.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `S x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.idx.iter().map(|&k| x[k]).collect()
    }

    /// `S^T v`.
    pub fn lift(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (vi, &k) in v.iter().zip(&self.idx) {
            out[k] = *vi;
        }
        out
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.d(), self.n);
        for (i, &k) in self.idx.iter().enumerate() {
            s[(i, k)] = 1.0;
        }
        s
    }
}

/// `A = 2 Theta (R + N^T J N)`, `B = 2 Theta N^T`.
pub fn drift_dispersion(
    ccr: &CcrStructure,
    field: &FieldStructure,
    r: &DMatrix<f64>,
    n_coupling: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let t2 = ccr.theta() * 2.0;
    let a = &t2 * (r + n_coupling.transpose() * field.j() * n_coupling);
    let b = t2 * n_coupling.transpose();
    (a, b)
}

/// Linear coupling model with its derived drift `A` and dispersion `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCouplingModel {
    pub ccr: CcrStructure,
    pub field: FieldStructure,
    pub r_energy: DMatrix<f64>,
    pub n_coupling: DMatrix<f64>,
    pub selector: Selector,
    pub psi: HermitianGaussianMixture,
    a_drift: DMatrix<f64>,
    b_disp: DMatrix<f64>,
}

impl LinearCouplingModel {
    pub fn build(
        ccr: CcrStructure,
        field: FieldStructure,
        r_energy: DMatrix<f64>,
        n_coupling: DMatrix<f64>,
        selector: Selector,
        psi: HermitianGaussianMixture,
    ) -> Result<Self> {
        let n = ccr.n();
        check_square(&r_energy, n, "energy matrix R")?;
        if max_abs(&(&r_energy - r_energy.transpose())) > 1e-12 * max_abs(&r_energy).max(1.0) {
            return Err(Error::InvalidModel(
                "energy matrix R must be symmetric".into(),
            ));
        }
        if n_coupling.nrows() != field.m() || n_coupling.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "coupling matrix N must be {}x{n}, found {}x{}",
                field.m(),
                n_coupling.nrows(),
                n_coupling.ncols()
            )));
        }
        if selector.n() != n {
            return Err(Error::DimensionMismatch {
                context: "selector ambient dimension",
                expected: n,
                found: selector.n(),
            });
        }
        if !psi.is_zero() && psi.d() != selector.d() {
            return Err(Error::DimensionMismatch {
                context: "Psi dimension vs selector",
                expected: selector.d(),
                found: psi.d(),
            });
        }
        let r_energy = (&r_energy + r_energy.transpose()) * 0.5;
        let (a_drift, b_disp) = drift_dispersion(&ccr, &field, &r_energy, &n_coupling);
        Ok(Self {
            ccr,
            field,
            r_energy,
            n_coupling,
            selector,
            psi,
            a_drift,
            b_disp,
        })
    }

    /// One mode, `Theta = ½ J`, `R = omega I`, `N = sqrt(gamma) I`, `Psi = 0`;
    /// `A = omega J - gamma I` and `B B^T = gamma I`.
    pub fn damped_oscillator(omega: f64, gamma: f64) -> Result<Self> {
        let ccr = CcrStructure::position_momentum(2)?;
        let field = FieldStructure::new(2)?;
        Self::build(
            ccr,
            field,
            DMatrix::identity(2, 2) * omega,
            DMatrix::identity(2, 2) * gamma.max(0.0).sqrt(),
            Selector::new(2, vec![0])?,
            HermitianGaussianMixture::zero(1),
        )
    }

    /// Position-momentum system with `R = diag(K, M^-1)` and the potential
    /// acting on the positions, `S = [I_d 0]`.
    pub fn position_momentum(
        stiffness: &DMatrix<f64>,
        inv_mass: &DMatrix<f64>,
        n_coupling: DMatrix<f64>,
        field: FieldStructure,
        psi: HermitianGaussianMixture,
    ) -> Result<Self> {
        let d = stiffness.nrows();
        let n = 2 * d;
        let mut r = DMatrix::zeros(n, n);
        r.view_mut((0, 0), (d, d)).copy_from(stiffness);
        r.view_mut((d, d), (d, d)).copy_from(inv_mass);
        let ccr = CcrStructure::position_momentum(n)?;
        Self::build(
            ccr,
            field,
            r,
            n_coupling,
            Selector::new(n, (0..d).collect())?,
            psi,
        )
    }

    pub fn n(&self) -> usize {
        self.ccr.n()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a_drift
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b_disp
    }

    pub fn bbt(&self) -> DMatrix<f64> {
        &self.b_disp * self.b_disp.transpose()
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        self.ccr.theta()
    }

    /// Largest deviation of the stored `A`, `B` from a fresh recomputation.
    pub fn derived_residual(&self) -> f64 {
        let (a, b) = drift_dispersion(&self.ccr, &self.field, &self.r_energy, &self.n_coupling);
        max_abs(&(a - &self.a_drift)).max(max_abs(&(b - &self.b_disp)))
    }

    /// `Theta S^T v` for a `d`-vector `v`.
    pub fn shift_for(&self, v: &[f64]) -> DVector<f64> {
        self.ccr.theta() * DVector::from_vec(self.selector.lift(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_gives_zero_matrices() {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        let m = LinearCouplingModel::build(
            ccr,
            FieldStructure::new(2).unwrap(),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            Selector::new(2, vec![0]).unwrap(),
            HermitianGaussianMixture::zero(1),
        )
        .unwrap();
        assert_eq!(m.a(), &DMatrix::zeros(2, 2));
        assert_eq!(m.b(), &DMatrix::zeros(2, 2));
    }

    #[test]
    fn unit_coupling_example() {
        let m = LinearCouplingModel::damped_oscillator(1.0, 1.0).unwrap();
        assert_eq!(
            m.a(),
            &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, -1.0])
        );
        assert_eq!(
            m.b(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
        );
        assert_eq!(m.derived_residual(), 0.0);
    }

    #[test]
    fn oscillator_block_form() {
        let k = DMatrix::from_row_slice(1, 1, &[3.0]);
        let minv = DMatrix::from_row_slice(1, 1, &[0.5]);
        let m = LinearCouplingModel::position_momentum(
            &k,
            &minv,
            DMatrix::zeros(2, 2),
            FieldStructure::new(2).unwrap(),
            HermitianGaussianMixture::zero(1),
        )
        .unwrap();
        // dq = M^-1 p dt, dp = -K q dt.
        assert_eq!(
            m.a(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -3.0, 0.0])
        );
    }

    #[test]
    fn selector_rules() {
        assert!(Selector::new(2, vec![0, 0]).is_err());
        assert!(Selector::new(2, vec![2]).is_err());
        let s = Selector::new(4, vec![2, 0]).unwrap();
        let sm = s.matrix();
        assert_eq!(&sm * sm.transpose(), DMatrix::identity(2, 2));
        assert_eq!(s.lift(&[5.0, 7.0]), vec![7.0, 0.0, 5.0, 0.0]);
    }

    #[test]
    fn mixture_pairing_and_potential() {
        let bad = HermitianGaussianMixture::new(
            1,
            vec![GaussianBump {
                amp: Complex64::new(1.0, 0.0),
                center: vec![1.0],
                width: 0.5,
            }],
        );
        assert!(matches!(bad, Err(Error::PairingViolation(_))));
        let a = 0.8;
        let (b, s) = (0.7, 0.4);
        let psi =
            HermitianGaussianMixture::paired(Complex64::new(a / 2.0, 0.0), vec![b], s).unwrap();
        for q in [-2.0, 0.0, 0.3, 1.7] {
            let exact =
                a * (2.0 * PI * s * s).sqrt() * (-s * s * q * q / 2.0).exp() * (b * q).cos();
            assert!((psi.potential(&[q]) - exact).abs() < 1e-14);
            assert!(psi.potential_complex(&[q]).im.abs() < 1e-14);
        }
        assert_eq!(HermitianGaussianMixture::zero(1).potential(&[0.4]), 0.0);
    }

    #[test]
    fn xi_examples() {
        let sel = Selector::new(2, vec![0]).unwrap();
        let real =
            HermitianGaussianMixture::paired(Complex64::new(1.0, 0.0), vec![0.5], 1.0).unwrap();
        // Real Psi at v = 0 and x = 0.
        assert_eq!(xi_kernel(&real, &sel, &[0.0, 0.0], &[0.0]), 0.0);
        let imag =
            HermitianGaussianMixture::paired(Complex64::new(0.0, 1.0), vec![1.0], 0.05).unwrap();
        assert!((xi_kernel(&imag, &sel, &[0.0, 0.0], &[1.0]) - 1.0).abs() < 1e-15);
    }
}
