//! Nondemolition measurement channels `Z = F Y` and innovation paths.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, min_eig_symmetric, split_complex};
use crate::phase::FieldStructure;
use crate::rng::NormalStream;

/// Residual allowed in the isotropy conditions.
pub const ISOTROPY_TOL: f64 = 1e-10;

const MAX_COMPLETION_ATTEMPTS: usize = 16;

/// `F = [Re G  Im G]`, checked for `F F^T > 0` and `F J F^T = 0`.
pub fn validate_channel(field: &FieldStructure, g: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let half = field.half();
    if g.ncols() != half {
        return Err(Error::DimensionMismatch {
            context: "columns of G",
            expected: half,
            found: g.ncols(),
        });
    }
    if g.nrows() == 0 || g.nrows() > half {
        return Err(Error::InvalidField(format!(
            "G must have between 1 and m/2 = {half} rows, found {}",
            g.nrows()
        )));
    }
    let (re, im) = split_complex(g);
    let f = concat_cols(&re, &im);
    let fft = &f * f.transpose();
    let min_eig = min_eig_symmetric(&fft);
    if !(min_eig > 1e-12 * max_abs(&fft).max(1.0)) {
        return Err(Error::ChannelRankDeficient { min_eig });
    }
    let residual = max_abs(&(&f * field.j() * f.transpose()));
    if residual > ISOTROPY_TOL {
        return Err(Error::ChannelNotIsotropic { residual });
    }
    Ok(f)
}

fn concat_cols(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn stack_rows(a: &DMatrix<f64>, row: &DVector<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + 1, a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.row_mut(a.nrows()).copy_from(&row.transpose());
    out
}

/// Orthogonal projector onto the row space of a full-row-rank `m`.
fn row_projector(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = m * m.transpose();
    let inv = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix of the current isotropic rows".into()))?
        .inverse();
    Ok(m.transpose() * inv * m)
}

/// `[Re E  Im E] J [Re E  Im E]^T`, the isotropy residual of `E = [G; D]`.
pub fn isotropy_residual(field: &FieldStructure, e: &DMatrix<Complex64>) -> f64 {
    let (re, im) = split_complex(e);
    let f = concat_cols(&re, &im);
    max_abs(&(&f * field.j() * f.transpose()))
}

/// Extends the isotropic row space of `F` to a Lagrangian one and returns
/// the added rows as the complex matrix `D`, `(m/2 - r) x m/2`.
///
/// Each new real row lies in `{x : F_cur J x = 0}` with its component along
/// the current row space removed. The first attempt takes the projected
/// canonical basis vector of largest norm; later attempts use random
/// combinations drawn from `seed`.
pub fn complete_isotropic(
    field: &FieldStructure,
    g: &DMatrix<Complex64>,
    seed: u64,
) -> Result<DMatrix<Complex64>> {
    let f = validate_channel(field, g)?;
    let m = field.m();
    let half = field.half();
    let r = g.nrows();
    let mut rng = NormalStream::new(seed, 0x6973_6f74);
    let mut last_reason = String::new();
    for attempt in 0..MAX_COMPLETION_ATTEMPTS {
        let mut cur = f.clone();
        let mut failed = false;
        while cur.nrows() < half {
            let mj = &cur * field.j();
            let p_null = DMatrix::identity(m, m) - row_projector(&mj)?;
            let p = p_null - row_projector(&cur)?;
            let x = if attempt == 0 {
                let (mut best, mut best_norm) = (0, -1.0);
                for i in 0..m {
                    let nrm = p.column(i).norm();
                    if nrm > best_norm + 1e-12 {
                        best = i;
                        best_norm = nrm;
                    }
                }
                p.column(best).into_owned()
            } else {
                let w = DVector::from_fn(m, |_, _| rng.next());
                &p * w
            };
            let nrm = x.norm();
            if !(nrm > 1e-8) {
                failed = true;
                last_reason = format!("complement direction vanished (norm {nrm:e})");
                break;
            }
            let x = x / nrm;
            // Snap tiny entries so exact inputs give exact completions.
            let x = x.map(|v| if v.abs() < 1e-15 { 0.0 } else { v });
            cur = stack_rows(&cur, &x);
        }
        if failed {
            continue;
        }
        let rows = cur.rows(r, half - r);
        let d = DMatrix::from_fn(half - r, half, |i, j| {
            Complex64::new(rows[(i, j)], rows[(i, half + j)])
        });
        let e = stack_complex(g, &d);
        let residual = isotropy_residual(field, &e);
        let min_sv = e.clone().singular_values().min();
        if residual <= ISOTROPY_TOL && min_sv > 1e-8 {
            return Ok(d);
        }
        last_reason = format!("residual {residual:e}, smallest singular value of E {min_sv:e}");
        let _ = rng.rng_mut().random::<u64>();
    }
    Err(Error::CompletionFailed {
        attempts: MAX_COMPLETION_ATTEMPTS,
        reason: last_reason,
    })
}

fn stack_complex(g: &DMatrix<Complex64>, d: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut e = DMatrix::zeros(g.nrows() + d.nrows(), g.ncols());
    e.rows_mut(0, g.nrows()).copy_from(g);
    if d.nrows() > 0 {
        e.rows_mut(g.nrows(), d.nrows()).copy_from(d);
    }
    e
}

/// `K = [I_r; (Re D Re G^T + Im D Im G^T)(F F^T)^-1]`.
pub fn make_k(g: &DMatrix<Complex64>, d: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let r = g.nrows();
    let (gr, gi) = split_complex(g);
    let fft = &gr * gr.transpose() + &gi * gi.transpose();
    let inv = fft
        .cholesky()
        .ok_or_else(|| Error::Singular("F F^T".into()))?
        .inverse();
    let mut k = DMatrix::zeros(r + d.nrows(), r);
    k.rows_mut(0, r).fill_with_identity();
    if d.nrows() > 0 {
        let (dr, di) = split_complex(d);
        let bottom = (&dr * gr.transpose() + &di * gi.transpose()) * inv;
        k.rows_mut(r, d.nrows()).copy_from(&bottom);
    }
    Ok(k)
}

/// `(E1, E2) = (Re E^-T, Im E^-T)`.
pub fn make_e12(e: &DMatrix<Complex64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let inv = e
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("E = [G; D]".into()))?;
    Ok(split_complex(&inv.transpose()))
}

/// `[E2 E1]` and `[-E1 E2]`, both `m/2 x m`.
pub fn e_blocks(e1: &DMatrix<f64>, e2: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (concat_cols(e2, e1), concat_cols(&(-e1), e2))
}

/// `P = [-E1 E2] N Theta`, `Q = [E2 E1] N`.
pub fn make_pq(
    channel: &MeasurementChannel,
    n_coupling: &DMatrix<f64>,
    theta: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n_coupling.nrows() != 2 * channel.half() {
        return Err(Error::DimensionMismatch {
            context: "rows of N",
            expected: 2 * channel.half(),
            found: n_coupling.nrows(),
        });
    }
    if theta.nrows() != n_coupling.ncols() {
        return Err(Error::DimensionMismatch {
            context: "columns of N",
            expected: theta.nrows(),
            found: n_coupling.ncols(),
        });
    }
    let (e21, me12) = e_blocks(&channel.e1, &channel.e2);
    Ok((me12 * n_coupling * theta, e21 * n_coupling))
}

/// What drives the diffusion part of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Increment<'a> {
    /// Prior dynamics: no measurement term.
    None,
    /// A given innovation increment `dChi`.
    Innovation(&'a DVector<f64>),
    /// A measurement increment `dZ`; the innovation is derived from it.
    Record(&'a DVector<f64>),
}

/// A validated channel with its completion and derived matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementChannel {
    pub g: DMatrix<Complex64>,
    pub d: DMatrix<Complex64>,
    pub e: DMatrix<Complex64>,
    pub f: DMatrix<f64>,
    pub k_gain: DMatrix<f64>,
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub fft: DMatrix<f64>,
}

impl MeasurementChannel {
    /// Validates `G` and completes it with the deterministic first attempt of
    /// [`complete_isotropic`].
    pub fn new(field: &FieldStructure, g: DMatrix<Complex64>) -> Result<Self> {
        Self::with_seed(field, g, 0)
    }

    pub fn with_seed(field: &FieldStructure, g: DMatrix<Complex64>, seed: u64) -> Result<Self> {
        let d = complete_isotropic(field, &g, seed)?;
        Self::from_parts(field, g, d)
    }

    /// Builds the channel from an explicit completion `D`.
    pub fn from_parts(
        field: &FieldStructure,
        g: DMatrix<Complex64>,
        d: DMatrix<Complex64>,
    ) -> Result<Self> {
        let f = validate_channel(field, &g)?;
        let half = field.half();
        if d.nrows() + g.nrows() != half || (d.nrows() > 0 && d.ncols() != half) {
            return Err(Error::DimensionMismatch {
                context: "rows of [G; D]",
                expected: half,
                found: d.nrows() + g.nrows(),
            });
        }
        let e = stack_complex(&g, &d);
        let residual = isotropy_residual(field, &e);
        if residual > ISOTROPY_TOL {
            return Err(Error::ChannelNotIsotropic { residual });
        }
        let (e1, e2) = make_e12(&e)?;
        let k_gain = make_k(&g, &d)?;
        let fft = &f * f.transpose();
        Ok(Self {
            g,
            d,
            e,
            f,
            k_gain,
            e1,
            e2,
            fft,
        })
    }

    /// Number `r` of measured channels.
    pub fn r(&self) -> usize {
        self.g.nrows()
    }

    pub fn half(&self) -> usize {
        self.g.ncols()
    }
}

/// Innovation increments on a time grid, plus the measurement increments
/// once an engine has produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPath {
    pub times: Vec<f64>,
    pub d_chi: Vec<DVector<f64>>,
    pub d_z: Vec<DVector<f64>>,
    pub seed: u64,
}

impl InnovationPath {
    pub fn steps(&self) -> usize {
        self.d_chi.len()
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    /// CSV with columns `t, dZ_1.., dChi_1..`; `t` is the start of each step.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let r = self.d_chi.first().map_or(0, |v| v.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=r).map(|k| format!("dZ_{k}")));
        header.extend((1..=r).map(|k| format!("dChi_{k}")));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.steps() {
            let mut rec = vec![fmt(self.times[i])];
            match self.d_z.get(i) {
                Some(z) => rec.extend(z.iter().map(|v| fmt(*v))),
                None => rec.extend((0..r).map(|_| String::new())),
            }
            rec.extend(self.d_chi[i].iter().map(|v| fmt(*v)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::NonFinite(format!("CSV flush: {e}")))?;
        Ok(())
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::NonFinite(format!("CSV output: {e}"))
}

/// Uniform grid `t0, t0 + dt, ..` with `steps + 1` points.
pub fn uniform_times(t0: f64, dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| t0 + i as f64 * dt).collect()
}

/// `dChi_i = chol(F F^T) sqrt(dt_i) xi_i` with `xi_i` standard normal from
/// ChaCha20 keyed by `seed`.
pub fn simulate_innovation(fft: &DMatrix<f64>, times: &[f64], seed: u64) -> Result<InnovationPath> {
    let l = fft
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "F F^T".into(),
            min_eig: min_eig_symmetric(fft),
        })?
        .l();
    let r = fft.nrows();
    let mut stream = NormalStream::new(seed, 0);
    let mut d_chi = Vec::with_capacity(times.len().saturating_sub(1));
    let mut xi = DVector::zeros(r);
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "times must increase (step {dt})"
            )));
        }
        stream.fill(xi.as_mut_slice());
        d_chi.push(&l * &xi * dt.sqrt());
    }
    Ok(InnovationPath {
        times: times.to_vec(),
        d_chi,
        d_z: Vec::new(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: usize, cols: usize, re: &[f64], im: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows, cols, |i, j| {
            Complex64::new(re[i * cols + j], im[i * cols + j])
        })
    }

    #[test]
    fn single_mode_homodyne() {
        let field = FieldStructure::new(2).unwrap();
        let g = cm(1, 1, &[1.0], &[0.0]);
        let f = validate_channel(&field, &g).unwrap();
        assert_eq!(f, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let ch = MeasurementChannel::new(&field, g).unwrap();
        assert_eq!(ch.d.nrows(), 0);
        assert_eq!(ch.k_gain, DMatrix::identity(1, 1));
        assert_eq!(ch.e1, DMatrix::identity(1, 1));
        assert_eq!(ch.e2, DMatrix::zeros(1, 1));
    }

    #[test]
    fn two_mode_completion_gives_identity() {
        let field = FieldStructure::new(4).unwrap();
        let g = cm(1, 2, &[1.0, 0.0], &[0.0, 0.0]);
        let ch = MeasurementChannel::new(&field, g).unwrap();
        assert_eq!(ch.d, cm(1, 2, &[0.0, 1.0], &[0.0, 0.0]));
        assert_eq!(ch.k_gain, DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
        assert!(isotropy_residual(&field, &ch.e) <= 1e-12);
    }

    #[test]
    fn rank_one_channels_are_always_isotropic() {
        let field = FieldStructure::new(4).unwrap();
        let g = cm(1, 2, &[1.0, 0.0], &[0.0, 1.0]);
        let f = validate_channel(&field, &g).unwrap();
        assert_eq!(f, DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn conjugate_quadratures_are_rejected() {
        let field = FieldStructure::new(4).unwrap();
        let g = cm(2, 2, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            validate_channel(&field, &g),
            Err(Error::ChannelNotIsotropic { .. })
        ));
        let g = cm(2, 2, &[1.0, 0.0, 2.0, 0.0], &[0.0; 4]);
        assert!(matches!(
            validate_channel(&field, &g),
            Err(Error::ChannelRankDeficient { .. })
        ));
    }

    #[test]
    fn innovation_is_deterministic() {
        let fft = DMatrix::from_row_slice(1, 1, &[4.0]);
        let t = uniform_times(0.0, 1e-3, 100);
        let a = simulate_innovation(&fft, &t, 9).unwrap();
        let b = simulate_innovation(&fft, &t, 9).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,dZ_1,dChi_1\n"));
        assert_eq!(text.lines().count(), 101);
    }
}
