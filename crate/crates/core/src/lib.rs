//! Model-free longitudinal speed control for road vehicles.
//!
//! The controller treats the vehicle as an ultra-local first-order system
//! `ẏ = F + α·u`, re-estimates the lumped term `F` every period with an
//! algebraic integral filter, and closes the loop with an intelligent-P law.
//! The adaptive variant re-solves `α` each period, which cuts overshoot
//! after abrupt reference changes.
//!
//! The crate also carries the test bench: a 7-DoF vehicle with Pacejka tires,
//! reference profiles, a seeded closed-loop harness with sensor noise and
//! actuation delay, and the metrics used to compare the two controllers.

pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod metrics;
pub mod ode;
pub mod scenario;
pub mod vehicle;

pub use controller::{ControlMode, ControllerConfig, MfcController};
pub use error::{Error, Result};
pub use harness::{run, RunConfig, RunTrace};
