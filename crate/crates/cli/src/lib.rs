//! Scenario runner and verification suites behind the `phasefilter` binary.

pub mod config;
pub mod engine;
pub mod error;
pub mod verify;
