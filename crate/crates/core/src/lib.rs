//! Indirect data-driven policy iteration for the linear quadratic regulator.
//!
//! The crate couples recursive least-squares identification of an unknown
//! linear plant with certainty-equivalent policy iteration (ORLS+PI), and
//! provides the tools to check the resulting error bounds on simulated runs:
//!
//! - [`matops`]: dense matrix helpers (Kronecker products, vectorization, solves).
//! - [`lqr`]: plant/cost types, policy evaluation and improvement, Riccati oracle.
//! - [`pi_dynamics`]: policy iteration as a map on value kernels.
//! - [`sysid`]: RLS, local persistency, ISS-type estimation error bounds.
//! - [`noise`]: adversarial noise schedules.
//! - [`orls`]: the coupled identification/control loop and its policy-gradient baseline.
//! - [`bounds`]: bound verdicts computed over recorded runs.
//! - [`harness`]: experiment configuration, multi-seed execution and output files.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod lqr;
pub mod matops;
pub mod noise;
pub mod orls;
pub mod pi_dynamics;
pub mod rng;
pub mod sysid;

pub use error::{Error, Result};
