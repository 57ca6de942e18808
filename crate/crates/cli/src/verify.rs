//! Built-in verification suites. Each check compares the library against an
//! independent reference from `phasefilter-oracles` or a closed form.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phasefilter::filters::{
    correction_terms, isserlis_fourth_moment, kalman_step, minimize_l2_direct,
    modified_kalman_step, optimality_residuals, s_sigma_solve, FilterState, KalmanFilter,
    PositivityPolicy,
};
use phasefilter::linear::{GaussianBump, HermitianGaussianMixture, LinearCouplingModel, Selector};
use phasefilter::measurement::{simulate_innovation, uniform_times, Increment, MeasurementChannel};
use phasefilter::phase::{
    gaussian_qcf, mgf_grad, mgf_hess, CcrStructure, FieldStructure, GaussianBelief, GridDomain,
};
use phasefilter::rng::NormalStream;
use phasefilter::side::{SideConfig, SideMode, SideOperator, SideState};
use phasefilter::weyl::{apply_a, apply_c, build_drift_kernel, build_gamma, WeylAtomOperator};
use phasefilter_oracles as oracles;
use serde::Serialize;

use crate::config::{Engine, ScenarioConfig};
use crate::engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Core,
    Filters,
    Side,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Vec<Suite>> {
        match s {
            "core" => Some(vec![Suite::Core]),
            "filters" => Some(vec![Suite::Filters]),
            "side" => Some(vec![Suite::Side]),
            "all" => Some(vec![Suite::Core, Suite::Filters, Suite::Side]),
            _ => None,
        }
    }
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub criterion: u32,
    pub name: String,
    pub pass: bool,
    /// Reported without a threshold.
    pub informational: bool,
    pub observed: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

fn check(
    suite: Suite,
    criterion: u32,
    name: &str,
    observed: f64,
    tolerance: f64,
    detail: String,
) -> Check {
    Check {
        suite,
        criterion,
        name: name.into(),
        pass: observed <= tolerance,
        informational: false,
        observed,
        tolerance,
        detail,
        seconds: 0.0,
    }
}

fn timed(f: impl FnOnce() -> Vec<Check>) -> Vec<Check> {
    let start = Instant::now();
    let mut out = f();
    let s = start.elapsed().as_secs_f64();
    for c in &mut out {
        c.seconds = s;
    }
    out
}

fn failed(suite: Suite, criterion: u32, name: &str, e: impl std::fmt::Display) -> Check {
    Check {
        suite,
        criterion,
        name: name.into(),
        pass: false,
        informational: false,
        observed: f64::NAN,
        tolerance: f64::NAN,
        detail: format!("error: {e}"),
        seconds: 0.0,
    }
}

fn normal_matrix(rng: &mut NormalStream, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.next())
}

fn random_spd(rng: &mut NormalStream, n: usize) -> DMatrix<f64> {
    let l = normal_matrix(rng, n, n);
    &l * l.transpose() / n as f64 + DMatrix::identity(n, n) * 0.3
}

fn random_symmetric(rng: &mut NormalStream, n: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, n, n);
    (&a + a.transpose()) * 0.5
}

/// Closed-form inverse of `S_Sigma` against a dense solve.
pub fn s_solve_exactness() -> Vec<Check> {
    timed(|| {
        let mut rng = NormalStream::new(101, 0);
        let mut worst = 0.0f64;
        for case in 0..50 {
            let n = [2, 4, 6][case % 3];
            let sigma = random_spd(&mut rng, n);
            let m = random_symmetric(&mut rng, n);
            let fast = match s_sigma_solve(&sigma, &m) {
                Ok(s) => s,
                Err(e) => return vec![failed(Suite::Filters, 1, "s_sigma_solve_vs_dense", e)],
            };
            let dense = oracles::linalg::dense_s_solve(&sigma, &m);
            worst = worst.max((&fast - &dense).norm() / dense.norm());
        }
        vec![check(
            Suite::Filters,
            1,
            "s_sigma_solve_vs_dense",
            worst,
            1e-10,
            "50 random SPD, n in {2,4,6}, relative Frobenius".into(),
        )]
    })
}

/// Isserlis fourth moment against Monte Carlo.
pub fn isserlis_monte_carlo() -> Vec<Check> {
    timed(|| {
        let mut rng = NormalStream::new(202, 0);
        let mut worst = 0.0f64;
        for case in 0..3 {
            let c = random_spd(&mut rng, 2);
            let s = random_symmetric(&mut rng, 2);
            let closed = isserlis_fourth_moment(&c, &s);
            let (mean, se) = oracles::montecarlo::fourth_moment(&c, &s, 1_000_000, 900 + case);
            for k in 0..4 {
                worst = worst.max((closed[k] - mean[k]).abs() / se[k]);
            }
        }
        vec![check(
            Suite::Filters,
            2,
            "isserlis_vs_monte_carlo",
            worst,
            3.0,
            "largest deviation in standard errors, 3 cases x 1e6 samples".into(),
        )]
    })
}

/// A single self-paired bump on one position-momentum mode.
pub fn single_bump_model() -> (LinearCouplingModel, GaussianBelief) {
    let psi = HermitianGaussianMixture::new(
        1,
        vec![GaussianBump {
            amp: Complex64::new(0.4, 0.0),
            center: vec![0.0],
            width: 0.7,
        }],
    )
    .expect("self-paired bump");
    let model = LinearCouplingModel::position_momentum(
        &DMatrix::identity(1, 1),
        &DMatrix::identity(1, 1),
        DMatrix::identity(2, 2) * 0.3,
        FieldStructure::new(2).expect("m = 2"),
        psi,
    )
    .expect("valid model");
    let belief = GaussianBelief::new(
        DVector::from_vec(vec![0.6, -0.2]),
        DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.7]),
    )
    .expect("SPD");
    (model, belief)
}

/// Closed-form corrections against direct `L2` minimization.
pub fn correction_optimality() -> Vec<Check> {
    timed(|| {
        let (model, belief) = single_bump_model();
        let name = "correction_terms_vs_direct_l2";
        let ct = match correction_terms(&model, &belief) {
            Ok(c) => c,
            Err(e) => return vec![failed(Suite::Filters, 3, name, e)],
        };
        let direct = match minimize_l2_direct(&model, &belief) {
            Ok(d) => d,
            Err(e) => return vec![failed(Suite::Filters, 3, name, e)],
        };
        let dl = (&ct.lambda - &direct.lambda).norm();
        let ds = (&ct.sigma - &direct.sigma).norm();
        let res = match optimality_residuals(&model, &belief, &ct.lambda, &ct.sigma) {
            Ok(r) => r.norm(),
            Err(e) => return vec![failed(Suite::Filters, 3, "first_order_residuals", e)],
        };
        vec![
            check(
                Suite::Filters,
                3,
                name,
                dl.max(ds),
                1e-5,
                format!("|dlambda| = {dl:.3e}, |dsigma|_F = {ds:.3e}"),
            ),
            check(
                Suite::Filters,
                3,
                "first_order_residuals",
                res,
                1e-6,
                "at the closed-form corrections".into(),
            ),
        ]
    })
}

fn homodyne(field: &FieldStructure) -> MeasurementChannel {
    MeasurementChannel::new(field, DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)))
        .expect("homodyne")
}

fn desk_initial() -> GaussianBelief {
    GaussianBelief::new(
        DVector::from_vec(vec![1.0, -0.5]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.8]),
    )
    .expect("SPD")
}

/// The modified filter with `Psi = 0` is
/// the Kalman filter bit for bit.
pub fn zero_potential_reduction() -> Vec<Check> {
    timed(|| {
        let name = "modified_equals_kalman_bitwise";
        let model = LinearCouplingModel::damped_oscillator(1.0, 0.5).expect("model");
        let ch = homodyne(&model.field);
        let dt = 1e-3;
        let path = match simulate_innovation(&ch.fft, &uniform_times(0.0, dt, 10_000), 44) {
            Ok(p) => p,
            Err(e) => return vec![failed(Suite::Filters, 4, name, e)],
        };
        let mut a = FilterState::new(desk_initial(), 0.0, 1);
        let mut b = a.clone();
        let mut mismatches = 0usize;
        let mut phi0 = 0.0f64;
        let mut herm = 0.0f64;
        for (i, dz) in path.d_chi.iter().enumerate() {
            a = match kalman_step(&a, &model, &ch, dz, dt) {
                Ok(s) => s,
                Err(e) => return vec![failed(Suite::Filters, 4, name, e)],
            };
            b = match modified_kalman_step(&b, &model, &ch, dz, dt, PositivityPolicy::Halt) {
                Ok(s) => s,
                Err(e) => return vec![failed(Suite::Filters, 4, name, e)],
            };
            let same = a
                .belief
                .mu
                .iter()
                .zip(b.belief.mu.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits())
                && a.belief
                    .sigma
                    .iter()
                    .zip(b.belief.sigma.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits());
            if !same {
                mismatches += 1;
            }
            if i % 1000 == 0 {
                let u = [0.3 + i as f64 * 1e-4, -0.7];
                let nu = [-u[0], -u[1]];
                let p = gaussian_qcf(&b.belief, &u).expect("dim");
                let q = gaussian_qcf(&b.belief, &nu).expect("dim");
                herm = herm.max((p - q.conj()).norm());
                phi0 = phi0.max((gaussian_qcf(&b.belief, &[0.0, 0.0]).expect("dim") - 1.0).norm());
            }
        }
        vec![
            check(
                Suite::Filters,
                4,
                name,
                mismatches as f64,
                0.0,
                "steps with any differing bit over 1e4 steps".into(),
            ),
            check(
                Suite::Filters,
                7,
                "filter_qcf_phi0",
                phi0,
                1e-6,
                "|Phi(t,0) - 1| of the Gaussian QCF".into(),
            ),
            check(
                Suite::Filters,
                7,
                "filter_qcf_hermitian",
                herm,
                1e-8,
                "|Phi(u) - conj Phi(-u)|".into(),
            ),
        ]
    })
}

pub const CROSS_ENGINE_SCENARIO: &str = include_str!("../scenarios/oscillator_compare.toml");

/// Grid posterior against the Kalman filter on a shared
/// innovation path.
pub fn cross_engine() -> Vec<Check> {
    timed(|| {
        let name = "grid_vs_kalman_mean";
        let scn = match ScenarioConfig::parse(CROSS_ENGINE_SCENARIO, "oscillator_compare.toml")
            .and_then(|c| c.build(CROSS_ENGINE_SCENARIO, "oscillator_compare.toml"))
        {
            Ok(s) => s,
            Err(e) => return vec![failed(Suite::Side, 5, name, e)],
        };
        debug_assert_eq!(scn.config.run.engine, Engine::Compare);
        let out = match engine::execute(&scn) {
            Ok(o) => o,
            Err(e) => return vec![failed(Suite::Side, 5, name, e)],
        };
        let s = &out.summary;
        let c = s.conservation.clone().unwrap_or_default();
        let rows = out.metrics.len();
        vec![
            check(
                Suite::Side,
                5,
                name,
                s.worst_kalman_mean_err.unwrap_or(f64::NAN),
                0.02,
                format!("max |dmu_i| / sqrt(Sigma_ii) over {rows} output times"),
            ),
            check(
                Suite::Side,
                5,
                "grid_vs_kalman_cov",
                s.worst_kalman_cov_err.unwrap_or(f64::NAN),
                0.05,
                "max |dSigma_ij| / sqrt(Sigma_ii Sigma_jj)".into(),
            ),
            check(
                Suite::Side,
                7,
                "filtering_grid_mass",
                c.mass_drift,
                1e-4,
                "max |mass - 1|".into(),
            ),
            check(
                Suite::Side,
                7,
                "filtering_grid_phi0",
                c.phi0_drift,
                1e-6,
                format!("max |Phi(t,0) - 1| at {} checkpoints", c.checkpoints),
            ),
            check(
                Suite::Side,
                7,
                "filtering_grid_hermitian",
                c.hermitian,
                1e-8,
                "QCF of the grid state".into(),
            ),
        ]
    })
}

/// Closed oscillator on the grid over one period.
pub fn closed_system() -> Vec<Check> {
    timed(|| {
        let name = "closed_oscillator_period";
        let model = LinearCouplingModel::build(
            CcrStructure::position_momentum(2).expect("ccr"),
            FieldStructure::new(2).expect("field"),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            Selector::new(2, vec![0]).expect("selector"),
            HermitianGaussianMixture::zero(1),
        )
        .expect("model");
        let init = GaussianBelief::new(
            DVector::from_vec(vec![1.5, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 0.4]),
        )
        .expect("SPD");
        let dom = GridDomain::cube(2, 8.0, 128).expect("grid");
        let op = match SideOperator::new(&model, None, dom.clone(), SideConfig::default()) {
            Ok(o) => o,
            Err(e) => return vec![failed(Suite::Side, 6, name, e)],
        };
        let period = 2.0 * std::f64::consts::PI;
        let steps = (period / op.max_dt()).ceil() as usize;
        let dt = period / steps as f64;
        let mut st = SideState::gaussian(dom.clone(), &init, SideMode::Prior).expect("state");
        let (mut mass, mut phi0, mut herm) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..=steps {
            if i > 0 {
                st = match op.step(&st, Increment::None, dt) {
                    Ok((s, _)) => s,
                    Err(e) => return vec![failed(Suite::Side, 6, name, e)],
                };
            }
            mass = mass.max((st.mass() - 1.0).abs());
            if i % (steps / 10).max(1) == 0 || i == steps {
                let q = st.qcf().expect("transform");
                phi0 = phi0.max((q.at_origin() - 1.0).norm());
                herm = herm.max(q.hermitian_violation());
            }
        }
        let (mu, sigma) =
            oracles::flow::gaussian_flow(model.a(), &model.bbt(), &init.mu, &init.sigma, period);
        let (mut num, mut den) = (0.0, 0.0);
        for (flat, v) in st.qpdf.values.iter().enumerate() {
            let x = DVector::from_vec(dom.point(flat));
            let e = oracles::flow::gaussian_density(&mu, &sigma, &x);
            num += (v - e).powi(2);
            den += e * e;
        }
        let rel = (num / den).sqrt();
        vec![
            check(
                Suite::Side,
                6,
                name,
                rel,
                1e-3,
                format!("relative L2 after {steps} steps of {dt:.5}"),
            ),
            check(
                Suite::Side,
                7,
                "closed_grid_mass",
                mass,
                1e-4,
                "max |mass - 1|".into(),
            ),
            check(
                Suite::Side,
                7,
                "closed_grid_phi0",
                phi0,
                1e-6,
                "max |Phi(t,0) - 1|".into(),
            ),
            check(
                Suite::Side,
                7,
                "closed_grid_hermitian",
                herm,
                1e-8,
                "QCF of the grid state".into(),
            ),
        ]
    })
}

/// Random isotropic `G = L G_0 U` with `G_0` real, `L` real and `U` unitary.
fn random_isotropic_g(rng: &mut NormalStream, r: usize, half: usize) -> DMatrix<Complex64> {
    let g0 = normal_matrix(rng, r, half);
    let l = normal_matrix(rng, r, r) + DMatrix::identity(r, r) * 2.0;
    let z = DMatrix::from_fn(half, half, |_, _| Complex64::new(rng.next(), rng.next()));
    let u = z.qr().q();
    (&l * g0).map(|x| Complex64::new(x, 0.0)) * u
}

/// Isotropic completion of random channels.
pub fn channel_completion() -> Vec<Check> {
    timed(|| {
        let name = "channel_completion";
        let mut rng = NormalStream::new(808, 0);
        let (mut iso, mut ktop, mut kdiff) = (0.0f64, 0.0f64, 0.0f64);
        let mut min_det = f64::INFINITY;
        for (m, r) in [(2usize, 1usize), (4, 1), (4, 2), (6, 2)] {
            let field = FieldStructure::new(m).expect("field");
            for k in 0..100 {
                let g = random_isotropic_g(&mut rng, r, m / 2);
                let ch = match MeasurementChannel::with_seed(&field, g.clone(), k) {
                    Ok(c) => c,
                    Err(e) => {
                        return vec![failed(
                            Suite::Core,
                            8,
                            name,
                            format!("(m, r) = ({m}, {r}): {e}"),
                        )]
                    }
                };
                let e = oracles::channel::stack(&g, &ch.d);
                iso = iso.max(oracles::channel::isotropy_defect(&e));
                min_det = min_det.min(oracles::channel::det_abs(&e));
                ktop = ktop.max((ch.k_gain.rows(0, r) - DMatrix::identity(r, r)).amax());
                kdiff = kdiff.max((&ch.k_gain - oracles::channel::k_matrix(&g, &ch.d)).amax());
            }
        }
        vec![
            check(
                Suite::Core,
                8,
                "completion_isotropy",
                iso,
                1e-10,
                "max entry of the isotropy form of E = [G; D]".into(),
            ),
            check(
                Suite::Core,
                8,
                "completion_nonsingular",
                if min_det > 1e-8 { 0.0 } else { 1.0 },
                0.0,
                format!("min |det E| = {min_det:.3e}"),
            ),
            check(
                Suite::Core,
                8,
                "gain_top_block",
                ktop.max(kdiff),
                1e-10,
                "K top block vs I_r and K vs direct formula".into(),
            ),
        ]
    })
}

fn random_atom(rng: &mut NormalStream, n: usize, scale: f64) -> (Complex64, Vec<f64>) {
    (
        Complex64::new(rng.next(), rng.next()),
        (0..n).map(|_| scale * rng.next()).collect(),
    )
}

fn to_oracle(op: &WeylAtomOperator) -> Vec<oracles::weyl::Atom> {
    op.atoms
        .iter()
        .map(|a| oracles::weyl::Atom {
            coef: a.coef,
            loc: DVector::from_vec(a.loc.clone()),
        })
        .collect()
}

/// Kernel sums against brute-force evaluation.
pub fn kernel_oracles() -> Vec<Check> {
    timed(|| {
        let name = "apply_a_vs_brute";
        let mut rng = NormalStream::new(909, 0);
        let field = FieldStructure::new(2).expect("field");
        let j = oracles::linalg::block_j(1);
        let (mut wa, mut wc) = (0.0f64, 0.0f64);
        for (n, h0_pairs, h_pairs) in [
            (2usize, 2usize, [1usize, 0]),
            (2, 1, [1, 1]),
            (4, 2, [1, 0]),
            (4, 1, [1, 1]),
        ] {
            let ccr = CcrStructure::position_momentum(n).expect("ccr");
            let mut h0 = WeylAtomOperator::zero();
            for _ in 0..h0_pairs {
                let (c, v) = random_atom(&mut rng, n, 0.8);
                h0.atoms.extend(WeylAtomOperator::cosine_pair(c, v).atoms);
            }
            let h: Vec<WeylAtomOperator> = h_pairs
                .iter()
                .map(|&p| {
                    let mut op = WeylAtomOperator::zero();
                    for _ in 0..p {
                        let (c, v) = random_atom(&mut rng, n, 0.8);
                        op.atoms.extend(WeylAtomOperator::cosine_pair(c, v).atoms);
                    }
                    op
                })
                .collect();
            let g = DMatrix::from_element(1, 1, Complex64::new(rng.next(), rng.next()));
            let ch = MeasurementChannel::new(&field, g).expect("channel");
            let drift = match build_drift_kernel(&h0, &h, &ccr, &field) {
                Ok(d) => d,
                Err(e) => return vec![failed(Suite::Core, 9, name, e)],
            };
            let gamma = match build_gamma(&h, &ch, &ccr) {
                Ok(g) => g,
                Err(e) => return vec![failed(Suite::Core, 9, "apply_c_vs_brute", e)],
            };
            let l = normal_matrix(&mut rng, n, n);
            let belief = GaussianBelief::new(
                DVector::from_fn(n, |_, _| rng.next()),
                &l * l.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5,
            )
            .expect("SPD");
            let phi = |u: &DVector<f64>| gaussian_qcf(&belief, u.as_slice()).expect("dim");
            let h0o = to_oracle(&h0);
            let ho: Vec<_> = h.iter().map(to_oracle).collect();
            for _ in 0..20 {
                let u = DVector::from_fn(n, |_, _| rng.next());
                let a = apply_a(&drift, &belief, u.as_slice()).expect("closed form");
                let b = oracles::weyl::brute_a(ccr.theta(), &j, &h0o, &ho, &phi, &u);
                wa = wa.max((a - b).norm() / b.norm().max(1.0));
                let c = apply_c(&gamma, &belief, u.as_slice()).expect("closed form");
                let d = oracles::weyl::brute_c(ccr.theta(), &ch.e, &ho, &phi, &u);
                wc = wc.max((c - &d).norm() / d.norm().max(1.0));
            }
        }
        vec![
            check(
                Suite::Core,
                9,
                name,
                wa,
                1e-12,
                "4 models, 20 points each".into(),
            ),
            check(
                Suite::Core,
                9,
                "apply_c_vs_brute",
                wc,
                1e-12,
                "4 models, 20 points each".into(),
            ),
        ]
    })
}

/// `phi_Sigma` derivatives against central differences.
pub fn mgf_derivatives() -> Vec<Check> {
    timed(|| {
        let mut rng = NormalStream::new(1010, 0);
        let (mut wg, mut wh) = (0.0f64, 0.0f64);
        for k in 0..100 {
            let n = 2 + k % 3;
            // Eigenvalues in [1, 1000] keep the condition number below 1e3.
            let q = normal_matrix(&mut rng, n, n).qr().q();
            let eig = DVector::from_fn(n, |i, _| 10f64.powf(3.0 * i as f64 / (n - 1) as f64));
            let sigma = &q * DMatrix::from_diagonal(&eig) * q.transpose();
            let sigma = (&sigma + sigma.transpose()) * 0.5;
            let mut z = DVector::from_fn(n, |_, _| Complex64::new(rng.next(), rng.next()));
            let nz = z.norm();
            if nz > 4.0 {
                z *= Complex64::new(3.9 / nz, 0.0);
            }
            let g = mgf_grad(&sigma, &z).expect("SPD");
            let h = mgf_hess(&sigma, &z).expect("SPD");
            let fg = oracles::mgf::fd_grad(&sigma, &z, 1e-5);
            let fh = oracles::mgf::fd_hess(&sigma, &z, 1e-4);
            wg = wg.max((&g - &fg).norm() / fg.norm().max(1e-300));
            wh = wh.max((&h - &fh).norm() / fh.norm().max(1e-300));
        }
        vec![
            check(
                Suite::Core,
                10,
                "mgf_gradient_vs_fd",
                wg,
                1e-6,
                "100 complex arguments, |z| <= 4".into(),
            ),
            check(
                Suite::Core,
                10,
                "mgf_hessian_vs_fd",
                wh,
                1e-6,
                "100 complex arguments, |z| <= 4".into(),
            ),
        ]
    })
}

/// A small bump on the desk oscillator, used for logging the modified filter.
pub fn small_bump_model() -> LinearCouplingModel {
    let psi = HermitianGaussianMixture::new(
        1,
        vec![GaussianBump {
            amp: Complex64::new(0.15, 0.0),
            center: vec![0.0],
            width: 0.8,
        }],
    )
    .expect("self-paired bump");
    LinearCouplingModel::position_momentum(
        &DMatrix::identity(1, 1),
        &DMatrix::identity(1, 1),
        DMatrix::identity(2, 2) * 0.5f64.sqrt(),
        FieldStructure::new(2).expect("m = 2"),
        psi,
    )
    .expect("valid model")
}

/// Physicality of the Riccati flow; the modified filter is
/// only logged.
pub fn physicality() -> Vec<Check> {
    timed(|| {
        let name = "riccati_physicality";
        let model = LinearCouplingModel::damped_oscillator(1.0, 0.5).expect("model");
        let ch = homodyne(&model.field);
        let dt = 1e-3;
        let steps = 10_000;
        let path =
            simulate_innovation(&ch.fft, &uniform_times(0.0, dt, steps), 1111).expect("path");
        let kf = KalmanFilter::new(&model, &ch).expect("filter");
        let mut s = FilterState::new(desk_initial(), 0.0, 1);
        let mut worst = s.belief.heisenberg_min_eig(&model.ccr);
        for x in &path.d_chi {
            s = match kf.step(
                &s,
                Increment::Innovation(x),
                dt,
                None,
                PositivityPolicy::Halt,
            ) {
                Ok(o) => o.state,
                Err(e) => return vec![failed(Suite::Filters, 11, name, e)],
            };
            worst = worst.min(s.belief.heisenberg_min_eig(&model.ccr));
        }
        let mut out = vec![check(
            Suite::Filters,
            11,
            name,
            -worst,
            1e-8,
            format!("min eig(Sigma + i Theta) = {worst:.3e} over {steps} steps"),
        )];

        let bump = small_bump_model();
        let kb = KalmanFilter::new(&bump, &ch).expect("filter");
        let mut s = FilterState::new(desk_initial(), 0.0, 1);
        let mut low = s.belief.heisenberg_min_eig(&bump.ccr);
        let mut violations = 0usize;
        let mut note = String::new();
        for x in path.d_chi.iter().take(2000) {
            let corr = match correction_terms(&bump, &s.belief) {
                Ok(c) => c,
                Err(e) => {
                    note = format!("; stopped: {e}");
                    break;
                }
            };
            match kb.step(
                &s,
                Increment::Innovation(x),
                dt,
                Some(&corr),
                PositivityPolicy::Halt,
            ) {
                Ok(o) => s = o.state,
                Err(e) => {
                    note = format!("; stopped: {e}");
                    break;
                }
            }
            let h = s.belief.heisenberg_min_eig(&bump.ccr);
            if h < -1e-8 {
                violations += 1;
            }
            low = low.min(h);
        }
        out.push(Check {
            suite: Suite::Filters,
            criterion: 11,
            name: "modified_physicality_log".into(),
            pass: true,
            informational: true,
            observed: low,
            tolerance: f64::NAN,
            detail: format!(
                "min eig(Sigma + i Theta) = {low:.3e}, {violations} violating steps of 2000{note}"
            ),
            seconds: 0.0,
        });
        out
    })
}

/// Runs the checks of one suite.
pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Core => [channel_completion(), kernel_oracles(), mgf_derivatives()].concat(),
        Suite::Filters => [
            s_solve_exactness(),
            isserlis_monte_carlo(),
            correction_optimality(),
            zero_potential_reduction(),
            physicality(),
        ]
        .concat(),
        Suite::Side => [cross_engine(), closed_system()].concat(),
    }
}
