//! Phase-space primitives: CCRs, Gaussian states, grids and transforms.

pub mod bochner;
pub mod ccr;
pub mod gaussian;
pub mod grid;
pub mod mgf;
pub mod transform;

pub use bochner::{bochner_matrix, bochner_min_eig, PSD_TOL};
pub use ccr::{canonical_symplectic, weyl_phase, CcrStructure, FieldStructure};
pub use gaussian::{gaussian_qcf, gaussian_qpdf, GaussianBelief, GaussianDensity};
pub use grid::{
    FnQcf, GridAxis, GridDomain, QcfEval, QcfGrid, QpdfGrid, ShiftStencil, ZeroExtended,
};
pub use mgf::{mgf_grad, mgf_hess, mgf_phi, Mgf};
pub use transform::{qcf_to_qpdf, qpdf_to_qcf, TransformReport};
