//! Gauss–Legendre rules and their tensor products.

use std::f64::consts::PI;

/// `n`-point Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi's initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, dp)
}

/// One-dimensional rule on an interval, optionally split into equal panels.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn new(lo: f64, hi: f64, order: usize, panels: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let panels = panels.max(1);
        let h = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(order * panels);
        let mut weights = Vec::with_capacity(order * panels);
        for p in 0..panels {
            let a = lo + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Tensor product of 1-D rules; points are stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(rules: &[Rule1d]) -> Self {
        let dim = rules.len();
        let total: usize = rules.iter().map(|r| r.nodes.len()).product();
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for (a, r) in rules.iter().enumerate() {
                points.push(r.nodes[idx[a]]);
                w *= r.weights[idx[a]];
            }
            weights.push(w);
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < rules[a].nodes.len() {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self {
            dim,
            points,
            weights,
        }
    }

    /// Same rule on every axis of `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, order: usize, panels: usize) -> Self {
        Self::new(&vec![Rule1d::new(lo, hi, order, panels); dim])
    }

    /// Rule on the box `center ± half_width`.
    pub fn boxed(center: &[f64], half_width: &[f64], order: usize, panels: usize) -> Self {
        let rules: Vec<Rule1d> = center
            .iter()
            .zip(half_width)
            .map(|(&c, &h)| Rule1d::new(c - h, c + h, order, panels))
            .collect();
        Self::new(&rules)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dim..(q + 1) * self.dim]
    }

    pub fn weight(&self, q: usize) -> f64 {
        self.weights[q]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks(self.dim.max(1))
            .zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_weights_for_small_orders() {
        let (x, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_eq!(x[1], 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in [1, 4, 9, 20, 64] {
            let rule = Rule1d::new(-1.0, 2.0, n, 1);
            let deg = 2 * n - 1;
            let exact =
                (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg + 1) as f64;
            let got = rule.integrate(|x| x.powi(deg as i32));
            assert!((got - exact).abs() <= 1e-11 * exact.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn tensor_gaussian_integral() {
        let t = TensorRule::cube(2, -8.0, 8.0, 24, 4);
        let got = t.integrate(|x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        assert!((got - 2.0 * PI).abs() < 1e-12);
    }
}
