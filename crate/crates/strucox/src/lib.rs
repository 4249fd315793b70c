//! Simulation, fitting and verification tools on top of `strucox-core`.
//!
//! * [`config`]: the JSON run configuration.
//! * [`io`]: dataset CSV files and their sidecars.
//! * [`report`]: output envelopes and atomic writes.
//! * [`harness`]: Monte-Carlo replicates of the sparse additive model.
//! * [`suites`]: the verification suites.
//! * [`cli`]: the `strucox` command.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod report;
pub mod suites;

pub use strucox_core as core;
