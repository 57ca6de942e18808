use nalgebra::{dmatrix, dvector, DMatrix};
use num_complex::Complex64;
use phasefilter::filters::{correction_terms, minimize_l2_direct, optimality_residuals};
use phasefilter::linear::{GaussianBump, HermitianGaussianMixture, LinearCouplingModel};
use phasefilter::phase::{FieldStructure, GaussianBelief};

fn model(psi: HermitianGaussianMixture) -> LinearCouplingModel {
    LinearCouplingModel::position_momentum(
        &dmatrix![1.0],
        &dmatrix![1.0],
        DMatrix::identity(2, 2) * 0.3,
        FieldStructure::new(2).unwrap(),
        psi,
    )
    .unwrap()
}

fn check(psi: HermitianGaussianMixture, belief: GaussianBelief) {
    let m = model(psi);
    let ct = correction_terms(&m, &belief).unwrap();
    let direct = minimize_l2_direct(&m, &belief).unwrap();
    let dl = (&ct.lambda - &direct.lambda).amax();
    let ds = (&ct.sigma - &direct.sigma).amax();
    let res = optimality_residuals(&m, &belief, &ct.lambda, &ct.sigma).unwrap();
    eprintln!(
        "lambda {} vs {}; sigma {} vs {}",
        ct.lambda, direct.lambda, ct.sigma, direct.sigma
    );
    eprintln!(
        "dl={dl:e} ds={ds:e} res={:e} cond={:e} qerr={:e}",
        res.norm(),
        direct.condition,
        ct.quadrature_error
    );
    assert!(dl <= 1e-5 && ds <= 1e-5);
    assert!(res.norm() <= 1e-6);
}

#[test]
fn centered_bump_matches_direct_minimizer() {
    let psi = HermitianGaussianMixture::new(
        1,
        vec![GaussianBump {
            amp: Complex64::new(0.4, 0.0),
            center: vec![0.0],
            width: 0.7,
        }],
    )
    .unwrap();
    let belief = GaussianBelief::new(dvector![0.6, -0.2], dmatrix![0.9, 0.1; 0.1, 0.7]).unwrap();
    check(psi, belief);
}

#[test]
fn shifted_pair_matches_direct_minimizer() {
    let psi = HermitianGaussianMixture::paired(Complex64::new(0.3, 0.2), vec![0.8], 0.5).unwrap();
    let belief =
        GaussianBelief::new(dvector![-0.3, 0.4], dmatrix![0.8, -0.15; -0.15, 1.1]).unwrap();
    check(psi, belief);
}
