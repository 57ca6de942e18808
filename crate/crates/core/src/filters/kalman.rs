//! The quantum Kalman filter for linear systems and its Gaussian-correction
//! modification.

use nalgebra::{DMatrix, DVector};

use super::gauss::CorrectionTerms;
use crate::error::{Error, Result};
use crate::linalg::{all_finite_mat, all_finite_vec, min_eig_symmetric, project_spd, symmetrize};
use crate::linear::LinearCouplingModel;
use crate::measurement::{make_pq, Increment, MeasurementChannel};
use crate::phase::GaussianBelief;

/// Posterior Gaussian belief at time `t` with the innovation of the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub belief: GaussianBelief,
    pub t: f64,
    pub last_innovation: DVector<f64>,
}

impl FilterState {
    pub fn new(belief: GaussianBelief, t: f64, r: usize) -> Self {
        Self {
            belief,
            t,
            last_innovation: DVector::zeros(r),
        }
    }
}

/// What to do when the modified filter produces a covariance that is not
/// positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PositivityPolicy {
    #[default]
    Halt,
    /// Clamp eigenvalues from below at `floor`.
    Project { floor: f64 },
}

/// Matrices of the filter equations, precomputed from a model and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilter {
    pub a: DMatrix<f64>,
    pub bbt: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub k_gain: DMatrix<f64>,
    pub fft: DMatrix<f64>,
    kfk: DMatrix<f64>,
}

/// Result of one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: FilterState,
    pub d_z: Option<DVector<f64>>,
    /// Eigenvalue floor applied by [`PositivityPolicy::Project`], if any.
    pub projected: bool,
}

impl KalmanFilter {
    pub fn new(model: &LinearCouplingModel, channel: &MeasurementChannel) -> Result<Self> {
        let (p, q) = make_pq(channel, &model.n_coupling, model.theta())?;
        let kfk = &channel.k_gain * &channel.fft * channel.k_gain.transpose();
        Ok(Self {
            a: model.a().clone(),
            bbt: model.bbt(),
            p,
            q,
            k_gain: channel.k_gain.clone(),
            fft: channel.fft.clone(),
            kfk,
        })
    }

    /// `P + Q Sigma`.
    pub fn pq_sigma(&self, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        &self.p + &self.q * sigma
    }

    /// `A Sigma + Sigma A^T + B B^T - 4 (P + Q Sigma)^T K F F^T K^T (P + Q Sigma)`.
    pub fn riccati_rhs(&self, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        let g = self.pq_sigma(sigma);
        let rhs = &self.a * sigma + sigma * self.a.transpose() + &self.bbt
            - g.transpose() * &self.kfk * &g * 4.0;
        symmetrize(&rhs)
    }

    /// Lyapunov part only, for steps without measurement.
    pub fn lyapunov_rhs(&self, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.a * sigma + sigma * self.a.transpose() + &self.bbt))
    }

    /// `2 F F^T K^T Q mu`, the predicted measurement drift.
    pub fn predicted_drift(&self, mu: &DVector<f64>) -> DVector<f64> {
        &self.fft * self.k_gain.transpose() * (&self.q * mu) * 2.0
    }

    /// One Euler–Maruyama step; `correction` adds `lambda dt` to the mean and
    /// `sigma dt` to the covariance.
    pub fn step(
        &self,
        state: &FilterState,
        increment: Increment<'_>,
        dt: f64,
        correction: Option<&CorrectionTerms>,
        policy: PositivityPolicy,
    ) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(Error::InvalidModel(format!(
                "time step {dt} must be positive"
            )));
        }
        let mu = &state.belief.mu;
        let sigma = &state.belief.sigma;
        let mut mu_new = mu + &self.a * mu * dt;
        let (d_chi, d_z) = match increment {
            Increment::None => (None, None),
            Increment::Innovation(x) => (Some(x.clone()), Some(x + self.predicted_drift(mu) * dt)),
            Increment::Record(z) => (Some(z - self.predicted_drift(mu) * dt), Some(z.clone())),
        };
        let rhs = if d_chi.is_some() {
            self.riccati_rhs(sigma)
        } else {
            self.lyapunov_rhs(sigma)
        };
        if let Some(x) = &d_chi {
            mu_new += self.pq_sigma(sigma).transpose() * (&self.k_gain * x) * 2.0;
        }
        let mut sigma_new = sigma + rhs * dt;
        if let Some(c) = correction {
            mu_new += &c.lambda * dt;
            sigma_new += &c.sigma * dt;
        }
        let mut sigma_new = symmetrize(&sigma_new);
        if !all_finite_vec(&mu_new) || !all_finite_mat(&sigma_new) {
            return Err(Error::NonFinite(format!(
                "filter state at t = {}",
                state.t + dt
            )));
        }
        let mut projected = false;
        if correction.is_some() {
            let min_eig = min_eig_symmetric(&sigma_new);
            if !(min_eig > 0.0) {
                match policy {
                    PositivityPolicy::Halt => {
                        return Err(Error::NotPositiveDefinite {
                            context: format!("covariance at t = {}", state.t + dt),
                            min_eig,
                        })
                    }
                    PositivityPolicy::Project { floor } => {
                        log::warn!(
                            "covariance lost definiteness (min eig {min_eig:e}); projecting"
                        );
                        sigma_new = project_spd(&sigma_new, floor);
                        projected = true;
                    }
                }
            }
        }
        let r = self.fft.nrows();
        let belief = GaussianBelief {
            mu: mu_new,
            sigma: sigma_new,
        };
        let state = FilterState {
            belief,
            t: state.t + dt,
            last_innovation: d_chi.unwrap_or_else(|| DVector::zeros(r)),
        };
        Ok(StepOutcome {
            state,
            d_z,
            projected,
        })
    }
}

/// `A Sigma + Sigma A^T + B B^T - 4 (P + Q Sigma)^T K F F^T K^T (P + Q Sigma)`.
pub fn riccati_rhs(
    model: &LinearCouplingModel,
    channel: &MeasurementChannel,
    sigma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    Ok(KalmanFilter::new(model, channel)?.riccati_rhs(sigma))
}

/// One step of the quantum Kalman filter driven by a measurement increment.
pub fn kalman_step(
    state: &FilterState,
    model: &LinearCouplingModel,
    channel: &MeasurementChannel,
    d_z: &DVector<f64>,
    dt: f64,
) -> Result<FilterState> {
    let f = KalmanFilter::new(model, channel)?;
    Ok(f.step(
        state,
        Increment::Record(d_z),
        dt,
        None,
        PositivityPolicy::Halt,
    )?
    .state)
}

/// One step of the modified filter; reduces to [`kalman_step`] when the
/// model has no non-quadratic part.
pub fn modified_kalman_step(
    state: &FilterState,
    model: &LinearCouplingModel,
    channel: &MeasurementChannel,
    d_z: &DVector<f64>,
    dt: f64,
    policy: PositivityPolicy,
) -> Result<FilterState> {
    let f = KalmanFilter::new(model, channel)?;
    let corr = if model.psi.is_zero() {
        None
    } else {
        Some(super::gauss::correction_terms(model, &state.belief)?)
    };
    Ok(
        f.step(state, Increment::Record(d_z), dt, corr.as_ref(), policy)?
            .state,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> (LinearCouplingModel, MeasurementChannel) {
        let model = LinearCouplingModel::damped_oscillator(1.0, 0.5).unwrap();
        let ch =
            MeasurementChannel::new(&model.field, DMatrix::from_element(1, 1, 1.0.into())).unwrap();
        (model, ch)
    }

    #[test]
    fn uncoupled_rhs_is_lyapunov() {
        let model = LinearCouplingModel::damped_oscillator(1.0, 0.0).unwrap();
        let ch =
            MeasurementChannel::new(&model.field, DMatrix::from_element(1, 1, 1.0.into())).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let rhs = riccati_rhs(&model, &ch, &s).unwrap();
        let a = model.a();
        assert!((rhs - (a * &s + &s * a.transpose())).amax() < 1e-15);
    }

    #[test]
    fn vacuum_is_stationary_under_homodyne_filtering() {
        let (model, ch) = oscillator();
        let f = KalmanFilter::new(&model, &ch).unwrap();
        // Vacuum Sigma = ½I: measurement back-action cancels.
        let rhs = f.riccati_rhs(&(DMatrix::identity(2, 2) * 0.5));
        assert!(rhs.amax() < 1e-15, "{rhs}");
    }

    #[test]
    fn record_and_innovation_inputs_agree() {
        let (model, ch) = oscillator();
        let f = KalmanFilter::new(&model, &ch).unwrap();
        let b = GaussianBelief::new(
            DVector::from_vec(vec![1.0, -0.5]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.8])),
        )
        .unwrap();
        let s0 = FilterState::new(b, 0.0, 1);
        let chi = DVector::from_vec(vec![0.03]);
        let a = f
            .step(
                &s0,
                Increment::Innovation(&chi),
                1e-3,
                None,
                PositivityPolicy::Halt,
            )
            .unwrap();
        let z = a.d_z.clone().unwrap();
        let b = f
            .step(
                &s0,
                Increment::Record(&z),
                1e-3,
                None,
                PositivityPolicy::Halt,
            )
            .unwrap();
        assert!((a.state.belief.mu - b.state.belief.mu).amax() < 1e-15);
        assert!((b.state.last_innovation[0] - 0.03).abs() < 1e-15);
    }
}
