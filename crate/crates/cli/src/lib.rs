//! Experiment runner for Koopman-invariant subspace identification: config
//! parsing, orchestration and result files.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
