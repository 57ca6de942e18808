//! Filter trajectories and their CSV export.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::gauss::CorrectionTerms;
use super::kalman::FilterState;
use crate::error::Result;
use crate::linalg::upper_triangle;
use crate::measurement::{csv_err, fmt};
use crate::phase::CcrStructure;

/// One exported row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub sigma_corr: DMatrix<f64>,
    pub innovation: DVector<f64>,
    /// Smallest eigenvalue of `Sigma + i Theta`.
    pub heisenberg_min_eig: f64,
}

impl TrajectoryRow {
    pub fn from_state(
        state: &FilterState,
        correction: Option<&CorrectionTerms>,
        ccr: &CcrStructure,
    ) -> Self {
        let n = state.belief.mu.len();
        let zero = CorrectionTerms::zero(n);
        let c = correction.unwrap_or(&zero);
        Self {
            t: state.t,
            mu: state.belief.mu.clone(),
            sigma: state.belief.sigma.clone(),
            lambda: c.lambda.clone(),
            sigma_corr: c.sigma.clone(),
            innovation: state.last_innovation.clone(),
            heisenberg_min_eig: state.belief.heisenberg_min_eig(ccr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn push(&mut self, row: TrajectoryRow) {
        self.rows.push(row);
    }

    /// Smallest `min-eig(Sigma + i Theta)` over the rows.
    pub fn worst_heisenberg(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.heisenberg_min_eig)
            .fold(f64::INFINITY, f64::min)
    }

    /// Columns `t, mu_i, Sigma_ij (i <= j), lambda_i, sigma_ij, dChi_k, heisenberg_min_eig`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(first) = self.rows.first() else {
            return Ok(());
        };
        let n = first.mu.len();
        let r = first.innovation.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("mu_{i}")));
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        header.extend(
            pairs
                .iter()
                .map(|(i, j)| format!("Sigma_{}{}", i + 1, j + 1)),
        );
        header.extend((1..=n).map(|i| format!("lambda_{i}")));
        header.extend(
            pairs
                .iter()
                .map(|(i, j)| format!("sigma_{}{}", i + 1, j + 1)),
        );
        header.extend((1..=r).map(|k| format!("dChi_{k}")));
        header.push("heisenberg_min_eig".into());
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![fmt(row.t)];
            rec.extend(row.mu.iter().map(|v| fmt(*v)));
            rec.extend(upper_triangle(&row.sigma).into_iter().map(fmt));
            rec.extend(row.lambda.iter().map(|v| fmt(*v)));
            rec.extend(upper_triangle(&row.sigma_corr).into_iter().map(fmt));
            rec.extend(row.innovation.iter().map(|v| fmt(*v)));
            rec.push(fmt(row.heisenberg_min_eig));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| crate::error::Error::NonFinite(format!("CSV flush: {e}")))?;
        Ok(())
    }
}
