use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use num_complex::Complex64;
use phasefilter::filters::direct::g_integral;
use phasefilter::filters::{FilterState, KalmanFilter, PositivityPolicy};
use phasefilter::linear::{HermitianGaussianMixture, LinearCouplingModel, Selector};
use phasefilter::measurement::{Increment, MeasurementChannel};
use phasefilter::phase::{CcrStructure, FieldStructure, GaussianBelief, GridDomain};
use phasefilter::quadrature::TensorRule;
use phasefilter::side::{
    extract_moments, marginal_excess_kurtosis, SideConfig, SideMode, SideOperator, SideState,
};

fn oscillator() -> LinearCouplingModel {
    LinearCouplingModel::damped_oscillator(1.0, 0.5).unwrap()
}

fn closed(r: DMatrix<f64>) -> LinearCouplingModel {
    LinearCouplingModel::build(
        CcrStructure::position_momentum(2).unwrap(),
        FieldStructure::new(2).unwrap(),
        r,
        DMatrix::zeros(2, 2),
        Selector::new(2, vec![0]).unwrap(),
        HermitianGaussianMixture::zero(1),
    )
    .unwrap()
}

fn homodyne() -> MeasurementChannel {
    MeasurementChannel::new(
        &FieldStructure::new(2).unwrap(),
        dmatrix![Complex64::new(1.0, 0.0)],
    )
    .unwrap()
}

#[test]
fn moments_of_sampled_gaussian() {
    let b = GaussianBelief::new(dvector![0.7, -0.4], dmatrix![0.9, 0.2; 0.2, 0.6]).unwrap();
    let s =
        SideState::gaussian(GridDomain::cube(2, 8.0, 128).unwrap(), &b, SideMode::Prior).unwrap();
    let (m, c) = extract_moments(&s).unwrap();
    assert!((m - &b.mu).amax() <= 1e-6);
    assert!((c - &b.sigma).amax() <= 1e-6);
}

#[test]
fn stationary_gaussian_has_no_drift() {
    let model = oscillator();
    let b = GaussianBelief::new(dvector![0.0, 0.0], DMatrix::identity(2, 2) * 0.5).unwrap();
    let dom = GridDomain::cube(2, 8.0, 128).unwrap();
    let s = SideState::gaussian(dom.clone(), &b, SideMode::Prior).unwrap();
    let op = SideOperator::new(&model, None, dom, SideConfig::default()).unwrap();
    let d = op.drift_fpk(&s.qpdf.values);
    let worst = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-4, "{worst:e}");
}

#[test]
fn no_dynamics_gives_zero_drift() {
    let model = closed(DMatrix::zeros(2, 2));
    let b = GaussianBelief::new(dvector![0.3, 0.0], DMatrix::identity(2, 2)).unwrap();
    let dom = GridDomain::cube(2, 6.0, 48).unwrap();
    let s = SideState::gaussian(dom.clone(), &b, SideMode::Prior).unwrap();
    let op = SideOperator::new(&model, None, dom, SideConfig::default()).unwrap();
    assert!(op.drift_fpk(&s.qpdf.values).iter().all(|v| *v == 0.0));
}

#[test]
fn nonlocal_term_conserves_mass_and_matches_qcf_form() {
    let psi = HermitianGaussianMixture::paired(Complex64::new(0.3, 0.2), vec![0.8], 0.5).unwrap();
    let model = LinearCouplingModel::position_momentum(
        &dmatrix![1.0],
        &dmatrix![1.0],
        DMatrix::identity(2, 2) * 0.3,
        FieldStructure::new(2).unwrap(),
        psi,
    )
    .unwrap();
    let b = GaussianBelief::new(dvector![-0.3, 0.4], dmatrix![0.8, -0.15; -0.15, 1.1]).unwrap();
    let dom = GridDomain::cube(2, 8.0, 128).unwrap();
    let s = SideState::gaussian(dom.clone(), &b, SideMode::Prior).unwrap();
    let op = SideOperator::new(&model, None, dom.clone(), SideConfig::default()).unwrap();
    let (nl, _) = op.drift_nonlocal(&s.qpdf.values);
    let mass: f64 = nl.iter().sum::<f64>() * dom.cell_volume();
    assert!(mass.abs() <= 1e-6, "{mass:e}");

    let rules: Vec<TensorRule> = model
        .psi
        .terms()
        .iter()
        .map(|t| TensorRule::boxed(&t.center, &[7.5 * t.width], 24, 8))
        .collect();
    for u in [[0.4, 0.0], [0.0, 0.7], [-0.5, 0.9], [1.2, -0.3]] {
        let mut ft = Complex64::default();
        for (flat, v) in nl.iter().enumerate() {
            let x = dom.point(flat);
            ft += Complex64::from_polar(1.0, u[0] * x[0] + u[1] * x[1]) * *v;
        }
        ft *= dom.cell_volume();
        let g = -g_integral(&model, &b, &u, &rules);
        eprintln!("u={u:?} grid={ft} qcf={g}");
        assert!((ft - g).norm() <= 1e-3, "{ft} vs {g}");
    }
}

#[test]
fn innovation_term_conserves_mass_and_gives_kalman_gain() {
    let model = oscillator();
    let ch = homodyne();
    let b = GaussianBelief::new(dvector![1.0, -0.5], dmatrix![1.0, 0.0; 0.0, 0.8]).unwrap();
    let dom = GridDomain::cube(2, 8.0, 128).unwrap();
    let s = SideState::gaussian(dom.clone(), &b, SideMode::Filtering).unwrap();
    let op = SideOperator::new(&model, Some(&ch), dom.clone(), SideConfig::default()).unwrap();
    let d_chi = dvector![0.05];
    let l = op
        .diffusion_update(&s.qpdf.values, &s.mean, &d_chi)
        .unwrap();
    let mass: f64 = l.iter().sum::<f64>() * dom.cell_volume();
    assert!(mass.abs() <= 1e-6);
    let moved = phasefilter::side::riemann_mean(&dom, &l);
    let kf = KalmanFilter::new(&model, &ch).unwrap();
    let gain = kf.pq_sigma(&b.sigma).transpose() * (&kf.k_gain * &d_chi) * 2.0;
    assert!((moved - gain).amax() <= 1e-8);
    assert!(op
        .diffusion_update(&s.qpdf.values, &s.mean, &dvector![0.0])
        .unwrap()
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn prior_mode_tracks_gaussian_flow() {
    let model = oscillator();
    let b = GaussianBelief::new(dvector![1.0, -0.5], dmatrix![1.0, 0.0; 0.0, 0.8]).unwrap();
    let dom = GridDomain::cube(2, 8.0, 96).unwrap();
    let mut s = SideState::gaussian(dom.clone(), &b, SideMode::Prior).unwrap();
    let op = SideOperator::new(&model, None, dom, SideConfig::default()).unwrap();
    let kf = KalmanFilter::new(&model, &homodyne()).unwrap();
    let mut f = FilterState::new(b, 0.0, 1);
    let dt = 2e-3;
    for _ in 0..250 {
        s = op.step(&s, Increment::None, dt).unwrap().0;
        f = kf
            .step(&f, Increment::None, dt, None, PositivityPolicy::Halt)
            .unwrap()
            .state;
    }
    let (m, c) = extract_moments(&s).unwrap();
    eprintln!("grid {m} {c} filter {} {}", f.belief.mu, f.belief.sigma);
    assert!((m - &f.belief.mu).amax() <= 2e-3);
    assert!((c - &f.belief.sigma).amax() <= 2e-3);
    assert!((s.mass() - 1.0).abs() <= 1e-4);
    assert!(marginal_excess_kurtosis(&s)
        .unwrap()
        .iter()
        .all(|k| k.abs() <= 1e-2));
}

#[test]
fn filtering_matches_kalman_briefly() {
    let model = oscillator();
    let ch = homodyne();
    let b = GaussianBelief::new(dvector![1.0, -0.5], dmatrix![1.0, 0.0; 0.0, 0.8]).unwrap();
    let dom = GridDomain::cube(2, 8.0, 96).unwrap();
    let mut s = SideState::gaussian(dom.clone(), &b, SideMode::Filtering).unwrap();
    let op = SideOperator::new(&model, Some(&ch), dom, SideConfig::default()).unwrap();
    let kf = KalmanFilter::new(&model, &ch).unwrap();
    let mut f = FilterState::new(b, 0.0, 1);
    let dt = 1e-3;
    let path = phasefilter::measurement::simulate_innovation(
        &ch.fft,
        &phasefilter::measurement::uniform_times(0.0, dt, 500),
        11,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for x in path.d_chi.iter() {
        let x: &DVector<f64> = x;
        s = op.step(&s, Increment::Innovation(x), dt).unwrap().0;
        f = kf
            .step(
                &f,
                Increment::Innovation(x),
                dt,
                None,
                PositivityPolicy::Halt,
            )
            .unwrap()
            .state;
        let (m, _) = extract_moments(&s).unwrap();
        let sd = f.belief.sigma.diagonal().map(f64::sqrt);
        worst = worst.max(((m - &f.belief.mu).component_div(&sd)).amax());
    }
    eprintln!("worst mean error in posterior std: {worst:e}");
    assert!(worst <= 0.02);
}
