//! Direct least-squares evaluation of the `L2`-optimal corrections, used to
//! cross-check the closed-form integrals.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linear::LinearCouplingModel;
use crate::phase::{gaussian_qcf, GaussianBelief};
use crate::quadrature::{Rule1d, TensorRule};

/// Quadrature settings for the `u`- and `v`-integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectL2Config {
    pub u_order: usize,
    pub u_panels: usize,
    /// `|Phi(u)|` at the edge of the `u`-box is about `exp(-u_cut)`.
    pub u_cut: f64,
    pub v_order: usize,
    pub v_panels: usize,
}

impl Default for DirectL2Config {
    fn default() -> Self {
        Self {
            u_order: 24,
            u_panels: 8,
            u_cut: 36.0,
            v_order: 24,
            v_panels: 6,
        }
    }
}

/// The sampled objective `|G(u) + (i u.lambda - ½ u^T sigma u) Phi(u)|^2`.
pub struct L2Problem {
    n: usize,
    rule: TensorRule,
    phi: Vec<Complex64>,
    g: Vec<Complex64>,
}

/// Minimizer of the sampled objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectL2Solution {
    pub lambda: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// Condition number of the normal equations.
    pub condition: f64,
}

/// First-order optimality residuals: `Im integral conj(Phi) F u du` and
/// `Re integral conj(Phi) F u u^T du`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityResiduals {
    pub lambda_condition: DVector<f64>,
    pub sigma_condition: DMatrix<f64>,
}

impl OptimalityResiduals {
    pub fn norm(&self) -> f64 {
        self.lambda_condition
            .norm()
            .max(self.sigma_condition.norm())
    }
}

/// `G(u) = 2 integral sin(u.Theta S^T v) Psi(v) Phi(u + S^T v) dv` by
/// tensor Gauss–Legendre over each bump's box.
pub fn g_integral(
    model: &LinearCouplingModel,
    belief: &GaussianBelief,
    u: &[f64],
    rules: &[TensorRule],
) -> Complex64 {
    let n = model.n();
    let mut acc = Complex64::default();
    let mut p = vec![0.0; n];
    for (bump, rule) in model.psi.terms().iter().zip(rules) {
        for (v, w) in rule.iter() {
            let sv = model.selector.lift(v);
            let s = model.ccr.symplectic_form(u, &sv).sin();
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                p[i] = u[i] + sv[i];
            }
            let phi = gaussian_qcf(belief, &p).expect("dimension checked");
            acc += bump.eval(v) * phi * (2.0 * s * w);
        }
    }
    acc
}

impl L2Problem {
    pub fn new(
        model: &LinearCouplingModel,
        belief: &GaussianBelief,
        cfg: DirectL2Config,
    ) -> Result<Self> {
        let n = model.n();
        let sinv = belief
            .sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite {
                context: "covariance for direct L2".into(),
                min_eig: f64::NAN,
            })?
            .inverse();
        let u_rules: Vec<Rule1d> = (0..n)
            .map(|i| {
                let r = (2.0 * cfg.u_cut * sinv[(i, i)]).sqrt();
                Rule1d::new(-r, r, cfg.u_order, cfg.u_panels)
            })
            .collect();
        let rule = TensorRule::new(&u_rules);
        let v_rules: Vec<TensorRule> = model
            .psi
            .terms()
            .iter()
            .map(|b| {
                let hw = vec![7.5 * b.width; b.center.len()];
                TensorRule::boxed(&b.center, &hw, cfg.v_order, cfg.v_panels)
            })
            .collect();
        let pts: Vec<&[f64]> = (0..rule.len()).map(|q| rule.point(q)).collect();
        let phi: Vec<Complex64> = pts
            .iter()
            .map(|u| gaussian_qcf(belief, u).expect("dimension"))
            .collect();
        let g: Vec<Complex64> = pts
            .par_iter()
            .map(|u| g_integral(model, belief, u, &v_rules))
            .collect();
        Ok(Self { n, rule, phi, g })
    }

    fn unknowns(&self) -> usize {
        self.n + self.n * (self.n + 1) / 2
    }

    /// Basis functions `i u_i Phi`, `-½ u_i^2 Phi`, `-u_i u_j Phi` (i < j).
    fn basis(&self, q: usize, out: &mut [Complex64]) {
        let u = self.rule.point(q);
        let phi = self.phi[q];
        let n = self.n;
        for i in 0..n {
            out[i] = Complex64::new(0.0, u[i]) * phi;
        }
        let mut k = n;
        for i in 0..n {
            for j in i..n {
                let c = if i == j {
                    -0.5 * u[i] * u[i]
                } else {
                    -u[i] * u[j]
                };
                out[k] = phi * c;
                k += 1;
            }
        }
    }

    fn unpack(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let lambda = x.rows(0, n).into_owned();
        let mut sigma = DMatrix::zeros(n, n);
        let mut k = n;
        for i in 0..n {
            for j in i..n {
                sigma[(i, j)] = x[k];
                sigma[(j, i)] = x[k];
                k += 1;
            }
        }
        (lambda, sigma)
    }

    pub fn solve(&self) -> Result<DirectL2Solution> {
        let p = self.unknowns();
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut b = vec![Complex64::default(); p];
        for q in 0..self.rule.len() {
            let w = self.rule.weight(q);
            self.basis(q, &mut b);
            for j in 0..p {
                let cj = b[j].conj() * w;
                rhs[j] -= (cj * self.g[q]).re;
                for k in j..p {
                    gram[(j, k)] += (cj * b[k]).re;
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                gram[(j, k)] = gram[(k, j)];
            }
        }
        let eig = gram.clone().symmetric_eigen();
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &e| {
                (l.min(e), h.max(e.abs()))
            });
        let condition = hi / lo.max(f64::MIN_POSITIVE);
        if !(condition < 1e12) {
            log::warn!(
                "direct L2 normal equations are ill-conditioned ({condition:e}); regularizing"
            );
            for j in 0..p {
                gram[(j, j)] += 1e-12 * hi;
            }
        }
        let x = gram
            .cholesky()
            .ok_or_else(|| Error::Singular("direct L2 normal equations".into()))?
            .solve(&rhs);
        let (lambda, sigma) = self.unpack(&x);
        Ok(DirectL2Solution {
            lambda,
            sigma,
            condition,
        })
    }

    pub fn residuals(&self, lambda: &DVector<f64>, sigma: &DMatrix<f64>) -> OptimalityResiduals {
        let n = self.n;
        let mut rl = DVector::zeros(n);
        let mut rs = DMatrix::zeros(n, n);
        for q in 0..self.rule.len() {
            let u = self.rule.point(q);
            let w = self.rule.weight(q);
            let ul: f64 = (0..n).map(|i| u[i] * lambda[i]).sum();
            let mut usu = 0.0;
            for i in 0..n {
                for j in 0..n {
                    usu += u[i] * sigma[(i, j)] * u[j];
                }
            }
            let f = self.g[q] + Complex64::new(-0.5 * usu, ul) * self.phi[q];
            let c = self.phi[q].conj() * f * w;
            for i in 0..n {
                rl[i] += c.im * u[i];
                for j in 0..n {
                    rs[(i, j)] += c.re * u[i] * u[j];
                }
            }
        }
        OptimalityResiduals {
            lambda_condition: rl,
            sigma_condition: rs,
        }
    }
}

/// Least-squares minimizer of the sampled objective.
pub fn minimize_l2_direct(
    model: &LinearCouplingModel,
    belief: &GaussianBelief,
) -> Result<DirectL2Solution> {
    if model.psi.is_zero() {
        let n = model.n();
        return Ok(DirectL2Solution {
            lambda: DVector::zeros(n),
            sigma: DMatrix::zeros(n, n),
            condition: 1.0,
        });
    }
    L2Problem::new(model, belief, DirectL2Config::default())?.solve()
}

/// Optimality residuals of `(lambda, sigma)` under the default quadrature.
pub fn optimality_residuals(
    model: &LinearCouplingModel,
    belief: &GaussianBelief,
    lambda: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<OptimalityResiduals> {
    Ok(L2Problem::new(model, belief, DirectL2Config::default())?.residuals(lambda, sigma))
}
