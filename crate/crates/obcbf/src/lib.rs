//! Safety filters for input-constrained control systems that only observe a
//! noisy output.
//!
//! The crate certifies and enforces forward invariance of a safe set for the
//! *true* state of a plant while the controller only sees a state estimate:
//! it propagates the estimated backup flow together with its sensitivity
//! matrix, bounds how far the unknown true flow can deviate, tightens the
//! barrier constraints by that bound, and solves a small quadratic program
//! every control step to filter a primary controller. A backup controller
//! serves as a certified fallback whenever the program is infeasible.
//!
//! Module map:
//! - [`math`]: dense small-dimension kernels (RK4, matrix exponential,
//!   symmetric eigensolves, spectral norm, finite differences);
//! - [`dynamics`]: control-affine plants and the bundled case-study models;
//! - [`estimation`]: error-bounded observers and estimation-error bounds;
//! - [`backup`]: backup sets/controllers, their certification inequalities,
//!   and backup-flow propagation with sensitivities;
//! - [`bounds`]: flow-deviation bounds and constraint-tightening rules;
//! - [`filter`]: the safety-filter QP builder and dense active-set solver;
//! - [`sim`]: closed-loop co-simulation, deterministic bounded noise,
//!   run monitors, and structured logs;
//! - [`accept`]: the end-to-end acceptance checks used by the CLI and the
//!   integration test suite.

pub mod error;
pub mod math;

pub mod backup;
pub mod dynamics;
pub mod estimation;

pub use error::Error;
