//! Grid integrator for the posterior QPDF of a linear system with a
//! Gaussian-mixture potential.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::stencil::{derivative, second_derivative, FdOrder};
use crate::error::{Error, Result};
use crate::linalg::all_finite_vec;
use crate::linear::LinearCouplingModel;
use crate::measurement::{make_pq, Increment, MeasurementChannel};
use crate::phase::{
    gaussian_qpdf, qpdf_to_qcf, GaussianBelief, GridDomain, QcfGrid, QpdfGrid, ShiftStencil,
};
use crate::quadrature::TensorRule;

/// Largest normalization drift [`extract_moments`] accepts.
pub const MOMENT_MASS_LIMIT: f64 = 1e-2;
/// Mass drift above which a step logs a warning.
pub const MASS_WARN_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SideMode {
    /// No measurement: the equation reduces to its drift.
    Prior,
    #[default]
    Filtering,
}

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SideScheme {
    /// Classical Runge–Kutta for the drift plus the Milstein correction for
    /// the innovation term.
    #[default]
    RungeKuttaMilstein,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideConfig {
    pub order: FdOrder,
    pub scheme: SideScheme,
    /// Divide by the mass after every step.
    pub renormalize: bool,
    /// A step fails when `max|mho|` grows by more than this factor.
    pub growth_limit: f64,
    /// Fraction of the explicit stability bound that `dt` may use.
    pub safety: f64,
    /// Gauss–Legendre order per panel of the `v`-rule.
    pub nonlocal_order: usize,
    /// Half-width of each bump's `v`-box in bump widths.
    pub nonlocal_box: f64,
}

impl Default for SideConfig {
    fn default() -> Self {
        Self {
            order: FdOrder::default(),
            scheme: SideScheme::default(),
            renormalize: false,
            growth_limit: 1.5,
            safety: 0.5,
            nonlocal_order: 12,
            nonlocal_box: 7.5,
        }
    }
}

/// Posterior QPDF on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SideState {
    pub qpdf: QpdfGrid,
    pub t: f64,
    pub mode: SideMode,
    /// `integral x mho(x) dx` as a Riemann sum.
    pub mean: DVector<f64>,
}

impl SideState {
    pub fn new(qpdf: QpdfGrid, t: f64, mode: SideMode) -> Self {
        let mean = riemann_mean(&qpdf.domain, &qpdf.values);
        Self {
            qpdf,
            t,
            mode,
            mean,
        }
    }

    /// Samples a Gaussian density.
    pub fn gaussian(domain: GridDomain, belief: &GaussianBelief, mode: SideMode) -> Result<Self> {
        if domain.dim() != belief.dim() {
            return Err(Error::DimensionMismatch {
                context: "grid vs belief",
                expected: belief.dim(),
                found: domain.dim(),
            });
        }
        gaussian_qpdf(belief, &vec![0.0; belief.dim()])?;
        let qpdf = QpdfGrid::from_fn(domain, |x| gaussian_qpdf(belief, x).expect("checked"));
        Ok(Self::new(qpdf, 0.0, mode))
    }

    pub fn mass(&self) -> f64 {
        self.qpdf.mass()
    }

    /// The QCF of the state on the dual grid.
    pub fn qcf(&self) -> Result<QcfGrid> {
        qpdf_to_qcf(&self.qpdf)
    }
}

/// What a step observed.
#[derive(Debug, Clone, PartialEq)]
pub struct SideStepInfo {
    pub d_chi: Option<DVector<f64>>,
    pub d_z: Option<DVector<f64>>,
    /// `mass - 1` after the step, before any renormalization.
    pub mass_drift: f64,
    /// Largest number of cells any nonlocal shift pulled from outside the grid.
    pub leaked: usize,
    pub renormalized: bool,
}

/// `integral x mho(x) dx`.
pub fn riemann_mean(domain: &GridDomain, values: &[f64]) -> DVector<f64> {
    let n = domain.dim();
    let mut m = DVector::zeros(n);
    let mut x = vec![0.0; n];
    for (flat, v) in values.iter().enumerate() {
        domain.point_into(flat, &mut x);
        for i in 0..n {
            m[i] += x[i] * v;
        }
    }
    m * domain.cell_volume()
}

#[derive(Debug, Clone)]
struct Measured {
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    k_gain: DMatrix<f64>,
    fft: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct VNode {
    /// `-2 w Re Psi(v)` and `-2 w Im Psi(v)`.
    wr: f64,
    wi: f64,
    stencil: ShiftStencil,
    /// `exp(i v_a x)` along each selected axis.
    phases: Vec<(usize, Vec<Complex64>)>,
}

/// The three pieces of the QPDF equation, precomputed for one grid.
#[derive(Debug, Clone)]
pub struct SideOperator {
    domain: GridDomain,
    cfg: SideConfig,
    a: DMatrix<f64>,
    bbt: DMatrix<f64>,
    meas: Option<Measured>,
    nodes: Vec<VNode>,
    coords: Vec<Vec<f64>>,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

impl SideOperator {
    pub fn new(
        model: &LinearCouplingModel,
        channel: Option<&MeasurementChannel>,
        domain: GridDomain,
        cfg: SideConfig,
    ) -> Result<Self> {
        let n = model.n();
        if domain.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "grid dimension",
                expected: n,
                found: domain.dim(),
            });
        }
        if cfg.nonlocal_order == 0
            || !(cfg.nonlocal_box > 0.0)
            || !(cfg.safety > 0.0)
            || !(cfg.growth_limit > 1.0)
        {
            return Err(Error::InvalidGrid("side configuration out of range".into()));
        }
        let meas = match channel {
            Some(ch) => {
                let (p, q) = make_pq(ch, &model.n_coupling, model.theta())?;
                Some(Measured {
                    p,
                    q,
                    k_gain: ch.k_gain.clone(),
                    fft: ch.fft.clone(),
                })
            }
            None => None,
        };
        let coords: Vec<Vec<f64>> = domain
            .axes()
            .iter()
            .map(|ax| (0..ax.len()).map(|k| ax.point(k)).collect())
            .collect();
        let sel = model.selector.indices().to_vec();
        let reach = sel
            .iter()
            .map(|&i| domain.axis(i).radius())
            .fold(0.0, f64::max);
        let mut nodes = Vec::new();
        for bump in model.psi.terms() {
            let hw = cfg.nonlocal_box * bump.width;
            let periods = 2.0 * hw * reach / (2.0 * std::f64::consts::PI);
            let panels = (periods.ceil() as usize).max(2);
            let rule = TensorRule::boxed(
                &bump.center,
                &vec![hw; bump.center.len()],
                cfg.nonlocal_order,
                panels,
            );
            for (v, w) in rule.iter() {
                let psi = bump.eval(v);
                let sv = model.selector.lift(v);
                let shift: Vec<f64> = (-(model.theta() * DVector::from_column_slice(&sv)))
                    .iter()
                    .copied()
                    .collect();
                let phases = sel
                    .iter()
                    .zip(v)
                    .map(|(&ax, &va)| {
                        (
                            ax,
                            coords[ax]
                                .iter()
                                .map(|x| Complex64::from_polar(1.0, va * x))
                                .collect(),
                        )
                    })
                    .collect();
                nodes.push(VNode {
                    wr: -2.0 * w * psi.re,
                    wi: -2.0 * w * psi.im,
                    stencil: ShiftStencil::new(&domain, &shift),
                    phases,
                });
            }
        }
        Ok(Self {
            domain,
            cfg,
            a: model.a().clone(),
            bbt: model.bbt(),
            meas,
            nodes,
            coords,
        })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn config(&self) -> &SideConfig {
        &self.cfg
    }

    fn x(&self, flat: usize, axis: usize) -> f64 {
        let len = self.coords[axis].len();
        self.coords[axis][(flat / self.domain.strides()[axis]) % len]
    }

    /// Largest stable step: diffusion, advection and the bounded nonlocal
    /// operator each limit `dt`.
    pub fn max_dt(&self) -> f64 {
        let h = self
            .domain
            .axes()
            .iter()
            .map(|ax| ax.step())
            .fold(f64::INFINITY, f64::min);
        let radius = self
            .domain
            .axes()
            .iter()
            .map(|ax| ax.radius())
            .fold(0.0, f64::max);
        let o = self.cfg.order;
        let mut dt = f64::INFINITY;
        let bb = spectral_norm(&self.bbt);
        if bb > 0.0 {
            dt = dt.min(h * h / bb * 4.0 / o.second_radius());
        }
        let an = spectral_norm(&self.a);
        if an > 0.0 {
            dt = dt.min(h / (an * radius * o.first_radius()));
        }
        let nl: f64 = self.nodes.iter().map(|q| q.wr.abs() + q.wi.abs()).sum();
        if nl > 0.0 {
            dt = dt.min(2.0 / nl);
        }
        self.cfg.safety * dt
    }

    pub fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidModel(format!(
                "time step {dt} must be positive"
            )));
        }
        let max = self.max_dt();
        if dt > max {
            return Err(Error::StepTooLarge { dt, suggested: max });
        }
        Ok(())
    }

    /// `-div(mho A x) + ½ div^2(mho B B^T)`.
    pub fn drift_fpk(&self, values: &[f64]) -> Vec<f64> {
        let n = self.domain.dim();
        let o = self.cfg.order;
        let mut out = vec![0.0; values.len()];
        for i in 0..n {
            if (0..n).all(|j| self.a[(i, j)] == 0.0) {
                continue;
            }
            let flux: Vec<f64> = (0..values.len())
                .into_par_iter()
                .map(|flat| {
                    (0..n)
                        .map(|j| self.a[(i, j)] * self.x(flat, j))
                        .sum::<f64>()
                        * values[flat]
                })
                .collect();
            let d = derivative(&self.domain, &flux, i, o);
            out.par_iter_mut().zip(&d).for_each(|(o, d)| *o -= d);
        }
        for i in 0..n {
            for j in i..n {
                let c = self.bbt[(i, j)];
                if c == 0.0 {
                    continue;
                }
                let d = if i == j {
                    second_derivative(&self.domain, values, i, o)
                } else {
                    derivative(&self.domain, &derivative(&self.domain, values, j, o), i, o)
                };
                let w = if i == j { 0.5 * c } else { c };
                out.par_iter_mut().zip(&d).for_each(|(o, d)| *o += w * d);
            }
        }
        out
    }

    /// `-2 integral Xi(x, v) mho(x - Theta S^T v) dv`, plus the leakage count.
    pub fn drift_nonlocal(&self, values: &[f64]) -> (Vec<f64>, usize) {
        let mut out = vec![0.0; values.len()];
        let mut leaked = 0;
        for node in &self.nodes {
            let (shifted, l) = node.stencil.apply(&self.domain, values);
            leaked = leaked.max(l);
            out.par_iter_mut().enumerate().for_each(|(flat, o)| {
                let mut e = Complex64::new(1.0, 0.0);
                for (ax, table) in &node.phases {
                    e *= table[(flat / self.domain.strides()[*ax]) % table.len()];
                }
                *o += (node.wr * e.im + node.wi * e.re) * shifted[flat];
            });
        }
        (out, leaked)
    }

    /// Sum of both drift pieces.
    pub fn drift(&self, values: &[f64]) -> (Vec<f64>, usize) {
        let mut d = self.drift_fpk(values);
        if self.nodes.is_empty() {
            return (d, 0);
        }
        let (nl, leaked) = self.drift_nonlocal(values);
        d.iter_mut().zip(&nl).for_each(|(a, b)| *a += b);
        (d, leaked)
    }

    fn measured(&self) -> Result<&Measured> {
        self.meas
            .as_ref()
            .ok_or_else(|| Error::InvalidModel("filtering needs a measurement channel".into()))
    }

    /// `(P^T K c, Q^T K c)`.
    fn directions(&self, c: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let m = self.measured()?;
        if c.len() != m.k_gain.ncols() {
            return Err(Error::DimensionMismatch {
                context: "innovation length",
                expected: m.k_gain.ncols(),
                found: c.len(),
            });
        }
        let kc = &m.k_gain * c;
        Ok((m.p.transpose() * &kc, m.q.transpose() * &kc))
    }

    /// `2 (-P d/dx eta + eta Q (x - mean) - mho Q dmean)^T K c`, where `dmean`
    /// is the mean of `eta`; with `eta = mho` and `dmean = 0` this is the
    /// innovation term of the equation.
    fn innovation_operator(
        &self,
        values: &[f64],
        eta: &[f64],
        mean: &DVector<f64>,
        d_mean: Option<&DVector<f64>>,
        c: &DVector<f64>,
    ) -> Result<Vec<f64>> {
        let n = self.domain.dim();
        let (a, b) = self.directions(c)?;
        let mut out: Vec<f64> = (0..eta.len())
            .into_par_iter()
            .map(|flat| {
                let bx: f64 = (0..n).map(|i| b[i] * (self.x(flat, i) - mean[i])).sum();
                2.0 * eta[flat] * bx
            })
            .collect();
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            let d = derivative(&self.domain, eta, i, self.cfg.order);
            out.par_iter_mut()
                .zip(&d)
                .for_each(|(o, d)| *o -= 2.0 * a[i] * d);
        }
        if let Some(dm) = d_mean {
            let s = 2.0 * b.dot(dm);
            out.par_iter_mut()
                .zip(values)
                .for_each(|(o, v)| *o -= s * v);
        }
        Ok(out)
    }

    /// The innovation term for an increment `dChi`.
    pub fn diffusion_update(
        &self,
        values: &[f64],
        mean: &DVector<f64>,
        d_chi: &DVector<f64>,
    ) -> Result<Vec<f64>> {
        self.innovation_operator(values, values, mean, None, d_chi)
    }

    /// `2 F F^T K^T Q mean`, the predicted measurement drift.
    pub fn predicted_drift(&self, mean: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.measured()?;
        Ok(&m.fft * m.k_gain.transpose() * (&m.q * mean) * 2.0)
    }

    /// Milstein correction `½ sum_kl L_k'[L_l mho] (dChi_k dChi_l - (F F^T)_kl dt)`.
    fn milstein(
        &self,
        values: &[f64],
        mean: &DVector<f64>,
        d_chi: &DVector<f64>,
        dt: f64,
    ) -> Result<Vec<f64>> {
        let m = self.measured()?;
        let r = d_chi.len();
        let corr = d_chi * d_chi.transpose() - &m.fft * dt;
        let mut out = vec![0.0; values.len()];
        for l in 0..r {
            let el = DVector::from_fn(r, |k, _| if k == l { 1.0 } else { 0.0 });
            let eta = self.innovation_operator(values, values, mean, None, &el)?;
            let d_mean = riemann_mean(&self.domain, &eta);
            let c = corr.column(l).into_owned();
            if c.iter().all(|x| *x == 0.0) {
                continue;
            }
            let t = self.innovation_operator(values, &eta, mean, Some(&d_mean), &c)?;
            out.iter_mut().zip(&t).for_each(|(o, t)| *o += 0.5 * t);
        }
        Ok(out)
    }

    /// One step of the QPDF equation.
    pub fn step(
        &self,
        state: &SideState,
        increment: Increment<'_>,
        dt: f64,
    ) -> Result<(SideState, SideStepInfo)> {
        self.check_dt(dt)?;
        if state.qpdf.domain != self.domain {
            return Err(Error::InvalidGrid(
                "state grid differs from the operator grid".into(),
            ));
        }
        let v0 = &state.qpdf.values;
        let mean = riemann_mean(&self.domain, v0);
        let (d_chi, d_z) = match (state.mode, increment) {
            (_, Increment::None) => (None, None),
            (SideMode::Prior, _) => {
                return Err(Error::InvalidModel(
                    "prior-mode state cannot take a measurement increment".into(),
                ))
            }
            (SideMode::Filtering, Increment::Innovation(x)) => {
                (Some(x.clone()), Some(x + self.predicted_drift(&mean)? * dt))
            }
            (SideMode::Filtering, Increment::Record(z)) => {
                (Some(z - self.predicted_drift(&mean)? * dt), Some(z.clone()))
            }
        };

        let (mut next, leaked) = match self.cfg.scheme {
            SideScheme::EulerMaruyama => {
                let (k, l) = self.drift(v0);
                (
                    v0.iter()
                        .zip(&k)
                        .map(|(v, k)| v + dt * k)
                        .collect::<Vec<_>>(),
                    l,
                )
            }
            SideScheme::RungeKuttaMilstein => {
                let stage = |k: &[f64], c: f64| -> Vec<f64> {
                    v0.iter().zip(k).map(|(v, k)| v + c * k).collect()
                };
                let (k1, l1) = self.drift(v0);
                let (k2, l2) = self.drift(&stage(&k1, 0.5 * dt));
                let (k3, l3) = self.drift(&stage(&k2, 0.5 * dt));
                let (k4, l4) = self.drift(&stage(&k3, dt));
                let next = (0..v0.len())
                    .map(|p| v0[p] + dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]))
                    .collect();
                (next, l1.max(l2).max(l3).max(l4))
            }
        };
        if let Some(x) = &d_chi {
            let l = self.diffusion_update(v0, &mean, x)?;
            next.iter_mut().zip(&l).for_each(|(a, b)| *a += b);
            if self.cfg.scheme == SideScheme::RungeKuttaMilstein {
                let mil = self.milstein(v0, &mean, x, dt)?;
                next.iter_mut().zip(&mil).for_each(|(a, b)| *a += b);
            }
        }

        let t = state.t + dt;
        if !all_finite_vec(&DVector::from_column_slice(&next)) {
            return Err(Error::NonFinite(format!("QPDF grid at t = {t}")));
        }
        let peak0 = v0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let peak1 = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak1 > self.cfg.growth_limit * peak0 {
            return Err(Error::Unstable(format!(
                "max |mho| grew from {peak0:e} to {peak1:e} in one step at t = {t}"
            )));
        }
        let mass = next.iter().sum::<f64>() * self.domain.cell_volume();
        let mass_drift = mass - 1.0;
        if mass_drift.abs() > MASS_WARN_TOL {
            log::warn!("QPDF mass drifted to {mass} at t = {t}");
        }
        let renormalized = self.cfg.renormalize && mass > 0.0;
        if renormalized {
            next.iter_mut().for_each(|v| *v /= mass);
        }
        let qpdf = QpdfGrid {
            domain: self.domain.clone(),
            values: next,
        };
        let new_state = SideState::new(qpdf, t, state.mode);
        Ok((
            new_state,
            SideStepInfo {
                d_chi,
                d_z,
                mass_drift,
                leaked,
                renormalized,
            },
        ))
    }
}

/// Mean and covariance by Riemann sums, normalized by the mass.
pub fn extract_moments(state: &SideState) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dom = &state.qpdf.domain;
    let mass = state.mass();
    if !((mass - 1.0).abs() <= MOMENT_MASS_LIMIT) {
        return Err(Error::NormalizationDrift {
            drift: mass - 1.0,
            limit: MOMENT_MASS_LIMIT,
        });
    }
    let n = dom.dim();
    let mean = riemann_mean(dom, &state.qpdf.values) / mass;
    let mut cov = DMatrix::zeros(n, n);
    let mut x = vec![0.0; n];
    for (flat, v) in state.qpdf.values.iter().enumerate() {
        dom.point_into(flat, &mut x);
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] += (x[i] - mean[i]) * (x[j] - mean[j]) * v;
            }
        }
    }
    cov *= dom.cell_volume() / mass;
    for i in 0..n {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok((mean, cov))
}

/// Excess kurtosis of each marginal.
pub fn marginal_excess_kurtosis(state: &SideState) -> Result<Vec<f64>> {
    let (mean, cov) = extract_moments(state)?;
    let dom = &state.qpdf.domain;
    let n = dom.dim();
    let mut m4 = vec![0.0; n];
    let mut x = vec![0.0; n];
    for (flat, v) in state.qpdf.values.iter().enumerate() {
        dom.point_into(flat, &mut x);
        for i in 0..n {
            m4[i] += (x[i] - mean[i]).powi(4) * v;
        }
    }
    let mass = state.mass();
    Ok((0..n)
        .map(|i| m4[i] * dom.cell_volume() / mass / cov[(i, i)].powi(2) - 3.0)
        .collect())
}

/// `-div(mho A x) + ½ div^2(mho B B^T)` for a single state.
pub fn drift_fpk(state: &SideState, model: &LinearCouplingModel) -> Result<Vec<f64>> {
    let op = SideOperator::new(
        model,
        None,
        state.qpdf.domain.clone(),
        SideConfig::default(),
    )?;
    Ok(op.drift_fpk(&state.qpdf.values))
}

/// The nonlocal potential term and the leakage count for a single state.
pub fn drift_nonlocal(state: &SideState, model: &LinearCouplingModel) -> Result<(Vec<f64>, usize)> {
    let op = SideOperator::new(
        model,
        None,
        state.qpdf.domain.clone(),
        SideConfig::default(),
    )?;
    Ok(op.drift_nonlocal(&state.qpdf.values))
}

/// The innovation term for an increment `dChi`.
pub fn diffusion_update(
    state: &SideState,
    model: &LinearCouplingModel,
    channel: &MeasurementChannel,
    d_chi: &DVector<f64>,
) -> Result<Vec<f64>> {
    let op = SideOperator::new(
        model,
        Some(channel),
        state.qpdf.domain.clone(),
        SideConfig::default(),
    )?;
    op.diffusion_update(&state.qpdf.values, &state.mean, d_chi)
}

/// One step with the default configuration.
pub fn side_step(
    state: &SideState,
    model: &LinearCouplingModel,
    channel: Option<&MeasurementChannel>,
    increment: Increment<'_>,
    dt: f64,
) -> Result<(SideState, SideStepInfo)> {
    SideOperator::new(
        model,
        channel,
        state.qpdf.domain.clone(),
        SideConfig::default(),
    )?
    .step(state, increment, dt)
}

/// Mean and covariance of the state as a correction-free Gaussian summary.
pub fn moments_as_belief(state: &SideState) -> Result<GaussianBelief> {
    let (mu, sigma) = extract_moments(state)?;
    GaussianBelief::new(mu, sigma)
}
