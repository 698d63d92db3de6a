//! Simulation and verification of a one-dimensional free-boundary
//! reaction-diffusion model of concrete carbonation.
//!
//! The moving domain `[0, s(t)]` is mapped onto `[0, 1]`; [`solver`] advances
//! the transformed system, [`diagnostics`] checks a trajectory against the
//! known a priori bounds, and [`oracle`] provides independent reference runs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::result_large_err)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod oracle;
mod quad;
pub mod solver;
pub mod transform;
pub mod tridiag;

pub use error::{Error, Result};
pub use model::{Scenario, ValidScenario};
pub use solver::{run, StepControl, Trajectory};
pub use transform::FixedGrid;
