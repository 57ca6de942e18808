//! Central finite-difference stencils with zero extension beyond the grid.

use rayon::prelude::*;

use crate::phase::GridDomain;

/// Accuracy order of the central differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdOrder {
    Second,
    Fourth,
    Sixth,
    #[default]
    Eighth,
}

impl FdOrder {
    pub fn from_order(order: usize) -> Option<Self> {
        match order {
            2 => Some(Self::Second),
            4 => Some(Self::Fourth),
            6 => Some(Self::Sixth),
            8 => Some(Self::Eighth),
            _ => None,
        }
    }

    pub fn order(self) -> usize {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
            Self::Sixth => 6,
            Self::Eighth => 8,
        }
    }

    /// Coefficients `c_j` of `f'(x) ≈ sum_j c_j (f(x + j h) - f(x - j h)) / h`.
    pub fn first(self) -> &'static [f64] {
        match self {
            Self::Second => &[0.5],
            Self::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
            Self::Sixth => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
            Self::Eighth => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
        }
    }

    /// `(c_0, c_j)` of `f''(x) ≈ (c_0 f(x) + sum_j c_j (f(x + j h) + f(x - j h))) / h^2`.
    pub fn second(self) -> (f64, &'static [f64]) {
        match self {
            Self::Second => (-2.0, &[1.0]),
            Self::Fourth => (-5.0 / 2.0, &[4.0 / 3.0, -1.0 / 12.0]),
            Self::Sixth => (-49.0 / 18.0, &[3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0]),
            Self::Eighth => (
                -205.0 / 72.0,
                &[8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0],
            ),
        }
    }

    /// `max_theta |sum_j 2 c_j sin(j theta)|`, the symbol bound of the first
    /// difference in units of `1/h`.
    pub fn first_radius(self) -> f64 {
        let c = self.first();
        (0..=2000)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 2000.0;
                c.iter()
                    .enumerate()
                    .map(|(j, cj)| 2.0 * cj * ((j + 1) as f64 * th).sin())
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Symbol bound of the second difference in units of `1/h^2`.
    pub fn second_radius(self) -> f64 {
        let (c0, c) = self.second();
        (0..=2000)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 2000.0;
                (c0 + c
                    .iter()
                    .enumerate()
                    .map(|(j, cj)| 2.0 * cj * ((j + 1) as f64 * th).cos())
                    .sum::<f64>())
                .abs()
            })
            .fold(0.0, f64::max)
    }
}

fn axis_info(domain: &GridDomain, axis: usize) -> (usize, usize, f64) {
    (
        domain.strides()[axis],
        domain.axis(axis).len(),
        domain.axis(axis).step(),
    )
}

/// First derivative along `axis`.
pub fn derivative(domain: &GridDomain, values: &[f64], axis: usize, order: FdOrder) -> Vec<f64> {
    let (stride, len, h) = axis_info(domain, axis);
    let c = order.first();
    (0..values.len())
        .into_par_iter()
        .map(|flat| {
            let k = (flat / stride) % len;
            let mut acc = 0.0;
            for (j, cj) in c.iter().enumerate() {
                let j = j + 1;
                let up = if k + j < len {
                    values[flat + j * stride]
                } else {
                    0.0
                };
                let dn = if k >= j {
                    values[flat - j * stride]
                } else {
                    0.0
                };
                acc += cj * (up - dn);
            }
            acc / h
        })
        .collect()
}

/// Second derivative along `axis`.
pub fn second_derivative(
    domain: &GridDomain,
    values: &[f64],
    axis: usize,
    order: FdOrder,
) -> Vec<f64> {
    let (stride, len, h) = axis_info(domain, axis);
    let (c0, c) = order.second();
    (0..values.len())
        .into_par_iter()
        .map(|flat| {
            let k = (flat / stride) % len;
            let mut acc = c0 * values[flat];
            for (j, cj) in c.iter().enumerate() {
                let j = j + 1;
                let up = if k + j < len {
                    values[flat + j * stride]
                } else {
                    0.0
                };
                let dn = if k >= j {
                    values[flat - j * stride]
                } else {
                    0.0
                };
                acc += cj * (up + dn);
            }
            acc / (h * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_low_degree_polynomials() {
        let dom = GridDomain::cube(1, 4.0, 41).unwrap();
        let xs: Vec<f64> = (0..41).map(|k| dom.axis(0).point(k)).collect();
        for order in [
            FdOrder::Second,
            FdOrder::Fourth,
            FdOrder::Sixth,
            FdOrder::Eighth,
        ] {
            let p = order.order();
            let f: Vec<f64> = xs.iter().map(|x| x.powi(p as i32)).collect();
            let d1 = derivative(&dom, &f, 0, order);
            let d2 = second_derivative(&dom, &f, 0, order);
            for k in 5..36 {
                let x = xs[k];
                assert!(
                    (d1[k] - p as f64 * x.powi(p as i32 - 1)).abs()
                        < 1e-8 * (1.0 + x.abs().powi(p as i32))
                );
                let exact = (p * (p - 1)) as f64 * x.powi(p as i32 - 2);
                assert!(
                    (d2[k] - exact).abs() < 1e-7 * (1.0 + x.abs().powi(p as i32)),
                    "{order:?} {k}"
                );
            }
        }
    }

    #[test]
    fn gaussian_derivative_converges_with_order() {
        let dom = GridDomain::cube(1, 8.0, 65).unwrap();
        let f: Vec<f64> = (0..65)
            .map(|k| (-0.5 * dom.axis(0).point(k).powi(2)).exp())
            .collect();
        let err = |o| {
            let d = derivative(&dom, &f, 0, o);
            (0..65)
                .map(|k| (d[k] + dom.axis(0).point(k) * f[k]).abs())
                .fold(0.0, f64::max)
        };
        assert!(err(FdOrder::Eighth) < err(FdOrder::Fourth));
        assert!(err(FdOrder::Fourth) < err(FdOrder::Second));
    }

    #[test]
    fn radii() {
        assert!((FdOrder::Second.first_radius() - 1.0).abs() < 1e-6);
        assert!((FdOrder::Second.second_radius() - 4.0).abs() < 1e-9);
        assert!(FdOrder::Eighth.second_radius() > 4.0);
    }

    #[test]
    fn second_axis_in_two_dimensions() {
        let dom = GridDomain::cube(2, 3.0, 31).unwrap();
        let f: Vec<f64> = (0..dom.size()).map(|q| dom.point(q)[1].powi(2)).collect();
        let d = second_derivative(&dom, &f, 1, FdOrder::Second);
        let q = dom.ravel(&[15, 15]);
        assert!((d[q] - 2.0).abs() < 1e-9);
        let d0 = derivative(&dom, &f, 0, FdOrder::Second);
        assert!(d0[q].abs() < 1e-12);
    }
}
