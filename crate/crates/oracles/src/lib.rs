//! Slow, direct reference computations used only by tests. Nothing here
//! depends on `phasefilter`; every formula is coded from its definition.

pub mod channel;
pub mod flow;
pub mod linalg;
pub mod mgf;
pub mod montecarlo;
pub mod weyl;
