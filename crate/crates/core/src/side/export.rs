//! CSV dumps of grid snapshots and moment trajectories.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::operator::{extract_moments, SideState};
use crate::error::{Error, Result};
use crate::linalg::upper_triangle;
use crate::measurement::{csv_err, fmt};

/// Columns `x_1..x_n, mho`, one row per grid node.
pub fn write_snapshot_csv<W: Write>(state: &SideState, out: W) -> Result<()> {
    let dom = &state.qpdf.domain;
    let n = dom.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    header.push("mho".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut x = vec![0.0; n];
    for (flat, v) in state.qpdf.values.iter().enumerate() {
        dom.point_into(flat, &mut x);
        let mut rec: Vec<String> = x.iter().map(|v| fmt(*v)).collect();
        rec.push(fmt(*v));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::NonFinite(format!("CSV flush: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub t: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentTrajectory {
    pub rows: Vec<MomentRow>,
}

impl MomentTrajectory {
    pub fn record(&mut self, state: &SideState) -> Result<()> {
        let (mean, cov) = extract_moments(state)?;
        self.rows.push(MomentRow {
            t: state.t,
            mean,
            cov,
            mass: state.mass(),
        });
        Ok(())
    }

    /// Columns `t, mean_i, cov_ij (i <= j), mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(first) = self.rows.first() else {
            return Ok(());
        };
        let n = first.mean.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("mean_{i}")));
        header.extend((0..n).flat_map(|i| (i..n).map(move |j| format!("cov_{}{}", i + 1, j + 1))));
        header.push("mass".into());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![fmt(r.t)];
            rec.extend(r.mean.iter().map(|v| fmt(*v)));
            rec.extend(upper_triangle(&r.cov).into_iter().map(fmt));
            rec.push(fmt(r.mass));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::NonFinite(format!("CSV flush: {e}")))
    }
}
