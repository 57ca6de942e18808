//! Regular axis-aligned grids carrying sampled QCFs and QPDFs.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Regular 1-D lattice `start + k * step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    start: f64,
    step: f64,
    len: usize,
}

impl GridAxis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len < 2 || !(step > 0.0) || !start.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "axis needs len >= 2 and a positive step (len = {len}, step = {step})"
            )));
        }
        Ok(Self { start, step, len })
    }

    /// Box `[-half_width, half_width)` with `len` points and the origin on the
    /// node `len / 2`.
    pub fn centered(half_width: f64, len: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width {half_width} must be positive"
            )));
        }
        let step = 2.0 * half_width / len as f64;
        Self::new(-((len / 2) as f64) * step, step, len)
    }

    /// Centered axis with a given spacing.
    pub fn centered_with_step(step: f64, len: usize) -> Result<Self> {
        Self::new(-((len / 2) as f64) * step, step, len)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// Index of the node at the origin.
    pub fn center_index(&self) -> usize {
        self.len / 2
    }

    pub fn is_centered(&self) -> bool {
        (self.point(self.center_index())).abs() <= 1e-12 * self.step
    }

    /// Largest `|x|` over the nodes.
    pub fn radius(&self) -> f64 {
        self.start.abs().max(self.last().abs())
    }

    /// Fourier-dual axis with `step * dual_step = 2 pi / len`.
    pub fn dual(&self) -> GridAxis {
        let step = 2.0 * PI / (self.len as f64 * self.step);
        GridAxis {
            start: -((self.len / 2) as f64) * step,
            step,
            len: self.len,
        }
    }

    /// Index of the mirror node `-x_k`, wrapping periodically.
    pub fn mirror_periodic(&self, k: usize) -> usize {
        let c = self.center_index() as isize;
        (2 * c - k as isize).rem_euclid(self.len as isize) as usize
    }

    /// Index of the mirror node `-x_k` if it exists on the lattice.
    pub fn mirror(&self, k: usize) -> Option<usize> {
        let c = self.center_index() as isize;
        let m = 2 * c - k as isize;
        (m >= 0 && (m as usize) < self.len).then_some(m as usize)
    }
}

/// Tensor-product grid, row-major (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    axes: Vec<GridAxis>,
    strides: Vec<usize>,
    size: usize,
}

impl GridDomain {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len() - 1).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].len;
        }
        let size = strides[0] * axes[0].len;
        Ok(Self {
            axes,
            strides,
            size,
        })
    }

    /// `[-half_width, half_width)^dim` with `len` points per axis.
    pub fn cube(dim: usize, half_width: f64, len: usize) -> Result<Self> {
        Self::new(vec![GridAxis::centered(half_width, len)?; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &GridAxis {
        &self.axes[a]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step).product()
    }

    pub fn is_centered(&self) -> bool {
        self.axes.iter().all(GridAxis::is_centered)
    }

    pub fn dual(&self) -> GridDomain {
        GridDomain::new(self.axes.iter().map(GridAxis::dual).collect())
            .expect("dual of a valid grid")
    }

    pub fn unravel(&self, flat: usize, idx: &mut [usize]) {
        let mut rem = flat;
        for a in 0..self.dim() {
            idx[a] = rem / self.strides[a];
            rem %= self.strides[a];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of the node `flat`.
    pub fn point_into(&self, flat: usize, x: &mut [f64]) {
        let mut rem = flat;
        for a in 0..self.dim() {
            let k = rem / self.strides[a];
            rem %= self.strides[a];
            x[a] = self.axes[a].point(k);
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.point_into(flat, &mut x);
        x
    }

    /// All node coordinates, `size * dim` values, node-major.
    pub fn coordinates(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.size * d];
        for (flat, chunk) in out.chunks_mut(d).enumerate() {
            self.point_into(flat, chunk);
        }
        out
    }

    /// Flat index of the origin node of a centered grid.
    pub fn origin_index(&self) -> usize {
        self.strides
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| s * a.center_index())
            .sum()
    }

    /// Flat index of the node at `-x`, if it lies on the grid.
    pub fn mirror(&self, flat: usize) -> Option<usize> {
        let mut rem = flat;
        let mut out = 0;
        for a in 0..self.dim() {
            let k = rem / self.strides[a];
            rem %= self.strides[a];
            out += self.axes[a].mirror(k)? * self.strides[a];
        }
        Some(out)
    }

    /// Flat index of the mirror node with periodic wrap-around on every axis.
    pub fn mirror_periodic(&self, flat: usize) -> usize {
        let mut rem = flat;
        let mut out = 0;
        for a in 0..self.dim() {
            let k = rem / self.strides[a];
            rem %= self.strides[a];
            out += self.axes[a].mirror_periodic(k) * self.strides[a];
        }
        out
    }

    /// Multilinear interpolation of `values` at `x`.
    ///
    /// With `zero_extend` the field is taken to vanish off the grid; otherwise
    /// points outside the node hull give `None`.
    pub fn interpolate<T>(&self, values: &[T], x: &[f64], zero_extend: bool) -> Option<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut base = [0isize; 8];
        let mut frac = [0.0f64; 8];
        let mut lo = vec![0isize; d];
        let mut fr = vec![0.0; d];
        let (lo, fr): (&mut [isize], &mut [f64]) = if d <= 8 {
            (&mut base[..d], &mut frac[..d])
        } else {
            (&mut lo[..], &mut fr[..])
        };
        for a in 0..d {
            let ax = &self.axes[a];
            let s = (x[a] - ax.start) / ax.step;
            if !s.is_finite() {
                return None;
            }
            let tol = 1e-9;
            if zero_extend {
                if s <= -1.0 || s >= ax.len as f64 {
                    return Some(T::default());
                }
                let i = s.floor();
                lo[a] = i as isize;
                fr[a] = s - i;
            } else {
                if s < -tol || s > (ax.len - 1) as f64 + tol {
                    return None;
                }
                let s = s.clamp(0.0, (ax.len - 1) as f64);
                let i = s.floor().min((ax.len - 2) as f64);
                lo[a] = i as isize;
                fr[a] = s - i;
            }
        }
        let mut acc = T::default();
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0isize;
            let mut inside = true;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                let k = lo[a] + bit as isize;
                if k < 0 || k >= self.axes[a].len as isize {
                    inside = false;
                    break;
                }
                w *= if bit == 1 { fr[a] } else { 1.0 - fr[a] };
                flat += k * self.strides[a] as isize;
            }
            if inside && w != 0.0 {
                acc = acc + values[flat as usize] * w;
            }
        }
        Some(acc)
    }

    /// Resamples `values` at every node shifted by the constant vector
    /// `shift`, i.e. returns `f(x + shift)` on the grid, with multilinear
    /// interpolation and zero extension. Also returns the number of nodes
    /// whose shifted point left the grid.
    pub fn shifted<T>(&self, values: &[T], shift: &[f64]) -> (Vec<T>, usize)
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T> + Send + Sync,
    {
        ShiftStencil::new(self, shift).apply(self, values)
    }
}

/// Precomputed multilinear weights for a constant shift on a regular grid.
#[derive(Debug, Clone)]
pub struct ShiftStencil {
    offsets: Vec<isize>,
    fracs: Vec<f64>,
}

impl ShiftStencil {
    pub fn new(domain: &GridDomain, shift: &[f64]) -> Self {
        let mut offsets = Vec::with_capacity(domain.dim());
        let mut fracs = Vec::with_capacity(domain.dim());
        for (a, ax) in domain.axes().iter().enumerate() {
            let s = shift[a] / ax.step;
            let mut o = s.floor();
            let mut f = s - o;
            // Snap shifts that land on a node up to rounding.
            if f > 1.0 - 1e-12 {
                o += 1.0;
                f = 0.0;
            } else if f < 1e-12 {
                f = 0.0;
            }
            offsets.push(o as isize);
            fracs.push(f);
        }
        Self { offsets, fracs }
    }

    pub fn apply<T>(&self, domain: &GridDomain, values: &[T]) -> (Vec<T>, usize)
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T> + Send + Sync,
    {
        let d = domain.dim();
        let corners: Vec<(Vec<isize>, f64)> = (0..(1usize << d))
            .filter_map(|corner| {
                let mut w = 1.0;
                let mut off = Vec::with_capacity(d);
                for a in 0..d {
                    let bit = (corner >> a) & 1;
                    w *= if bit == 1 {
                        self.fracs[a]
                    } else {
                        1.0 - self.fracs[a]
                    };
                    off.push(self.offsets[a] + bit as isize);
                }
                (w != 0.0).then_some((off, w))
            })
            .collect();
        let strides = domain.strides();
        let lens: Vec<isize> = domain.axes().iter().map(|ax| ax.len() as isize).collect();
        let cells: Vec<(T, bool)> = (0..domain.size())
            .into_par_iter()
            .map(|flat| {
                let mut acc = T::default();
                let mut outside = false;
                for (off, w) in &corners {
                    let mut src = 0isize;
                    let mut ok = true;
                    for a in 0..d {
                        let k = ((flat / strides[a]) % lens[a] as usize) as isize + off[a];
                        if k < 0 || k >= lens[a] {
                            ok = false;
                            break;
                        }
                        src += k * strides[a] as isize;
                    }
                    if ok {
                        acc = acc + values[src as usize] * *w;
                    } else {
                        outside = true;
                    }
                }
                (acc, outside)
            })
            .collect();
        let leaked = cells.iter().filter(|c| c.1).count();
        let out = cells.into_iter().map(|c| c.0).collect();
        (out, leaked)
    }
}

/// Quasi-characteristic function sampled on a grid in `u`-space.
#[derive(Debug, Clone, PartialEq)]
pub struct QcfGrid {
    pub domain: GridDomain,
    pub values: Vec<Complex64>,
}

impl QcfGrid {
    pub fn new(domain: GridDomain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.size() {
            return Err(Error::DimensionMismatch {
                context: "QCF grid values",
                expected: domain.size(),
                found: values.len(),
            });
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn(domain: GridDomain, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut x = vec![0.0; domain.dim()];
        let values = (0..domain.size())
            .map(|flat| {
                domain.point_into(flat, &mut x);
                f(&x)
            })
            .collect();
        Self { domain, values }
    }

    /// `Phi(0)`; the grid must be centered.
    pub fn at_origin(&self) -> Complex64 {
        self.values[self.domain.origin_index()]
    }

    /// Largest `|Phi(u) - conj(Phi(-u))|` over node pairs present on the grid.
    pub fn hermitian_violation(&self) -> f64 {
        (0..self.values.len())
            .filter_map(|k| {
                self.domain
                    .mirror(k)
                    .map(|m| (self.values[k] - self.values[m].conj()).norm())
            })
            .fold(0.0, f64::max)
    }

    /// `Phi(u) <- ½ (Phi(u) + conj(Phi(-u)))` with periodic mirroring, so the
    /// discrete transform of the result is exactly real.
    pub fn symmetrize(&mut self) {
        let old = self.values.clone();
        for (k, v) in self.values.iter_mut().enumerate() {
            let m = self.domain.mirror_periodic(k);
            *v = (old[k] + old[m].conj()) * 0.5;
        }
    }
}

/// Real quasi-probability density sampled on a grid in `x`-space.
#[derive(Debug, Clone, PartialEq)]
pub struct QpdfGrid {
    pub domain: GridDomain,
    pub values: Vec<f64>,
}

impl QpdfGrid {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.size() {
            return Err(Error::DimensionMismatch {
                context: "QPDF grid values",
                expected: domain.size(),
                found: values.len(),
            });
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn(domain: GridDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; domain.dim()];
        let values = (0..domain.size())
            .map(|flat| {
                domain.point_into(flat, &mut x);
                f(&x)
            })
            .collect();
        Self { domain, values }
    }

    pub fn cell_volume(&self) -> f64 {
        self.domain.cell_volume()
    }

    /// Riemann sum of the density.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Anything that can evaluate a quasi-characteristic function at a point.
pub trait QcfEval {
    fn dim(&self) -> usize;

    /// `None` when `u` is outside the evaluable domain.
    fn eval(&self, u: &[f64]) -> Option<Complex64>;
}

impl QcfEval for QcfGrid {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn eval(&self, u: &[f64]) -> Option<Complex64> {
        self.domain.interpolate(&self.values, u, false)
    }
}

impl QcfEval for crate::phase::gaussian::GaussianBelief {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn eval(&self, u: &[f64]) -> Option<Complex64> {
        crate::phase::gaussian::gaussian_qcf(self, u).ok()
    }
}

/// Grid QCF that vanishes outside its box.
#[derive(Debug, Clone, Copy)]
pub struct ZeroExtended<'a>(pub &'a QcfGrid);

impl QcfEval for ZeroExtended<'_> {
    fn dim(&self) -> usize {
        self.0.domain.dim()
    }

    fn eval(&self, u: &[f64]) -> Option<Complex64> {
        self.0.domain.interpolate(&self.0.values, u, true)
    }
}

/// Closure-backed QCF defined everywhere.
pub struct FnQcf<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Complex64> FnQcf<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Complex64> QcfEval for FnQcf<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &[f64]) -> Option<Complex64> {
        Some((self.f)(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_axis_layout() {
        let a = GridAxis::centered(8.0, 128).unwrap();
        assert_eq!(a.start(), -8.0);
        assert_eq!(a.step(), 0.125);
        assert_eq!(a.point(64), 0.0);
        assert_eq!(a.mirror(0), None);
        assert_eq!(a.mirror(1), Some(127));
        assert_eq!(a.mirror_periodic(0), 0);
        let odd = GridAxis::centered(1.0, 5).unwrap();
        assert!(odd.is_centered());
        assert_eq!(odd.mirror(0), Some(4));
    }

    #[test]
    fn dual_of_dual_is_identity() {
        let a = GridAxis::centered(8.0, 128).unwrap();
        let dd = a.dual().dual();
        assert!((dd.step() - a.step()).abs() < 1e-15 && dd.len() == a.len());
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let g = GridDomain::cube(2, 2.0, 16).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let vals: Vec<f64> = (0..g.size()).map(|k| f(&g.point(k))).collect();
        for p in [[0.1, 0.33], [-1.9, 1.7], [0.0, -2.0]] {
            let v = g.interpolate(&vals, &p, false).unwrap();
            assert!((v - f(&p)).abs() < 1e-12);
        }
        assert!(g.interpolate(&vals, &[2.5, 0.0], false).is_none());
        assert_eq!(g.interpolate(&vals, &[3.0, 0.0], true), Some(0.0));
    }

    #[test]
    fn shifted_matches_pointwise_interpolation() {
        let g = GridDomain::cube(2, 3.0, 24).unwrap();
        let vals: Vec<f64> = (0..g.size())
            .map(|k| {
                let x = g.point(k);
                (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp()
            })
            .collect();
        let shift = [0.37, -0.61];
        let (s, _) = g.shifted(&vals, &shift);
        for k in (0..g.size()).step_by(7) {
            let x = g.point(k);
            let p = [x[0] + shift[0], x[1] + shift[1]];
            let v = g.interpolate(&vals, &p, true).unwrap();
            assert!((v - s[k]).abs() < 1e-14);
        }
    }
}
