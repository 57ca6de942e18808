//! Grid integration of the posterior QPDF equation, used as a reference for
//! the Gaussian filters.

pub mod export;
pub mod operator;
pub mod stencil;

pub use export::{write_snapshot_csv, MomentRow, MomentTrajectory};
pub use operator::{
    diffusion_update, drift_fpk, drift_nonlocal, extract_moments, marginal_excess_kurtosis,
    moments_as_belief, riemann_mean, side_step, SideConfig, SideMode, SideOperator, SideScheme,
    SideState, SideStepInfo, MASS_WARN_TOL, MOMENT_MASS_LIMIT,
};
pub use stencil::{derivative, second_derivative, FdOrder};
