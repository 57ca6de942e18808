use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use phasefilter::filters::{s_sigma_apply, s_sigma_solve};
use phasefilter::measurement::MeasurementChannel;
use phasefilter::phase::{
    bochner_min_eig, gaussian_qcf, gaussian_qpdf, qpdf_to_qcf, weyl_phase, CcrStructure,
    FieldStructure, GaussianBelief, GridDomain, QpdfGrid, PSD_TOL,
};
use phasefilter::weyl::{apply_a, apply_b, build_drift_kernel, build_gamma, ups, WeylAtomOperator};
use proptest::prelude::*;

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

/// SPD matrix `L L^T / n + 0.2 I` from `n * n` entries.
fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.5..1.5f64, n * n).prop_map(move |v| {
        let l = DMatrix::from_vec(n, n, v);
        &l * l.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2
    })
}

/// A physical state for `Theta = ½ J`: `Sigma = Sigma_0 + ½ I` with `Sigma_0` SPD.
fn physical(n: usize) -> impl Strategy<Value = GaussianBelief> {
    (vec_of(n), spd(n)).prop_map(move |(m, s)| {
        GaussianBelief::new(DVector::from_vec(m), s + DMatrix::identity(n, n) * 0.5).unwrap()
    })
}

fn pair_op(n: usize) -> impl Strategy<Value = WeylAtomOperator> {
    (
        -1.0..1.0f64,
        -1.0..1.0f64,
        prop::collection::vec(-1.0..1.0f64, n),
    )
        .prop_map(|(re, im, v)| WeylAtomOperator::cosine_pair(Complex64::new(re, im), v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weyl_phase_is_antisymmetric(u in vec_of(4), v in vec_of(4)) {
        let ccr = CcrStructure::position_momentum(4).unwrap();
        let a = weyl_phase(&ccr, &u, &v).unwrap();
        let b = weyl_phase(&ccr, &v, &u).unwrap();
        prop_assert!((a * b - 1.0).norm() < 1e-12);
        prop_assert!((weyl_phase(&ccr, &u, &u).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn ups_is_orthogonal(u in vec_of(2), v in vec_of(2)) {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        let field = FieldStructure::new(4).unwrap();
        let y = ups(&ccr, &field, &u, &v).unwrap();
        prop_assert!((y.transpose() * &y - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn gaussian_qcf_is_hermitian_and_normalized(b in physical(2), u in vec_of(2)) {
        let nu: Vec<f64> = u.iter().map(|x| -x).collect();
        let p = gaussian_qcf(&b, &u).unwrap();
        let q = gaussian_qcf(&b, &nu).unwrap();
        prop_assert!((p - q.conj()).norm() < 1e-14);
        prop_assert!(p.norm() <= 1.0 + 1e-14);
        prop_assert!((gaussian_qcf(&b, &[0.0, 0.0]).unwrap() - 1.0).norm() == 0.0);
    }

    #[test]
    fn physical_gaussian_passes_bochner(b in physical(2), pts in prop::collection::vec(vec_of(2), 6)) {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        prop_assert!(b.is_physical(&ccr, PSD_TOL));
        prop_assert!(bochner_min_eig(&ccr, &b, &pts).unwrap() > -1e-10);
    }

    #[test]
    fn s_sigma_solve_inverts_apply(sigma in spd(3), m in spd(3)) {
        let x = s_sigma_solve(&sigma, &m).unwrap();
        let back = s_sigma_apply(&sigma, &x).unwrap();
        prop_assert!((&back - &m).norm() <= 1e-10 * m.norm());
    }

    #[test]
    fn drift_kernel_vanishes_at_origin(b in physical(2), h0 in pair_op(2), h1 in pair_op(2), h2 in pair_op(2)) {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        let field = FieldStructure::new(2).unwrap();
        let k = build_drift_kernel(&h0, &[h1, h2], &ccr, &field).unwrap();
        prop_assert!(apply_a(&k, &b, &[0.0, 0.0]).unwrap().norm() < 1e-14);
    }

    #[test]
    fn innovation_kernel_vanishes_at_origin(b in physical(2), h1 in pair_op(2), h2 in pair_op(2), g in (-2.0..2.0f64, -2.0..2.0f64)) {
        let ccr = CcrStructure::position_momentum(2).unwrap();
        let field = FieldStructure::new(2).unwrap();
        let ch = MeasurementChannel::new(&field, DMatrix::from_element(1, 1, Complex64::new(g.0 + 2.5, g.1))).unwrap();
        let k = build_gamma(&[h1, h2], &ch, &ccr).unwrap();
        prop_assert!(apply_b(&k, &b, &[0.0, 0.0]).unwrap().norm() < 1e-13);
    }

    #[test]
    fn transform_preserves_normalization(mu in vec_of(2), s in spd(2)) {
        let mu: Vec<f64> = mu.iter().map(|x| x * 0.5).collect();
        let b = GaussianBelief::new(DVector::from_vec(mu), s * 0.5 + DMatrix::identity(2, 2) * 0.3).unwrap();
        let dom = GridDomain::cube(2, 12.0, 96).unwrap();
        let p = QpdfGrid::from_fn(dom, |x| gaussian_qpdf(&b, x).unwrap());
        let q = qpdf_to_qcf(&p).unwrap();
        prop_assert!((q.at_origin() - p.mass()).norm() < 1e-12);
        prop_assert!((p.mass() - 1.0).abs() < 1e-8);
        prop_assert!(q.hermitian_violation() < 1e-12);
    }
}
