//! Model predictive control of a single-zone indoor microclimate.
//!
//! The crate couples a lumped air / inertia-mass / CO₂ room model with three
//! controllers (nonlinear MPC solved by sequential linear programming, a
//! linearized MPC solved as one LP, and a quantized on/off thermostat) and a
//! rolling-horizon harness that runs them against the full nonlinear plant.

// NaN-rejecting `!(x > 0.0)` checks and index loops over coupled arrays are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod comfort;
pub mod controllers;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod lp;
pub mod model;
pub mod scenario;
pub mod slp;

pub use error::{Error, Result};
