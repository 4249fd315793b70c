//! Structured group-penalized estimation for the nonparametric Cox model.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; file formats, configuration and the command line
//! live in the `strucox` crate.
//!
//! Module map:
//!
//! * [`survival`]: censored records, risk sets, simulation from the hazard model.
//! * [`basis`]: dictionary functions, design expansion and smoothing factors.
//! * [`likelihood`]: partial likelihood, score, Hessian, weights, empirical norm.
//! * [`penalty`]: group penalty family, dual norms and proximal operators.
//! * [`solver`]: proximal gradient fitting and tuning-parameter rules.
//! * [`theory`]: numerical checks of the estimator's supporting inequalities.
//!
//! Indices are 0-based throughout the API.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod error;
pub mod likelihood;
pub mod linalg;
pub mod penalty;
pub mod rng;
pub mod solver;
pub mod survival;
pub mod theory;

pub use error::{Error, Result};
