use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Sample mean and standard error of `xi xi^T s xi xi^T` for `xi ~ N(0, c)`.
pub fn fourth_moment(
    c: &DMatrix<f64>,
    s: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = c.nrows();
    let l = c.clone().cholesky().expect("positive definite").l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = DMatrix::zeros(n, n);
    let mut sum2 = DMatrix::zeros(n, n);
    for _ in 0..samples {
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let xi = &l * z;
        let q = (xi.transpose() * s * &xi)[(0, 0)];
        let m = &xi * xi.transpose() * q;
        sum2 += m.component_mul(&m);
        sum += m;
    }
    let k = samples as f64;
    let mean = &sum / k;
    let var = (&sum2 / k - mean.component_mul(&mean)) * (k / (k - 1.0));
    (mean, var.map(|v| (v.max(0.0) / k).sqrt()))
}
