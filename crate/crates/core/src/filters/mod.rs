//! Gaussian filters: the quantum Kalman filter, the correction terms of the
//! Gaussian approximation, and the modified filter built from them.

pub mod direct;
pub mod gauss;
pub mod kalman;
pub mod trajectory;

pub use direct::{
    minimize_l2_direct, optimality_residuals, DirectL2Config, DirectL2Solution, L2Problem,
    OptimalityResiduals,
};
pub use gauss::{
    correction_terms, correction_terms_with, isserlis_fourth_moment, s_sigma_apply, s_sigma_solve,
    CorrectionQuadrature, CorrectionTerms,
};
pub use kalman::{
    kalman_step, modified_kalman_step, riccati_rhs, FilterState, KalmanFilter, PositivityPolicy,
    StepOutcome,
};
pub use trajectory::{Trajectory, TrajectoryRow};
