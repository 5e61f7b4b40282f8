//! Simulation of the pulse protocol that prepares, heralds and reads out
//! single-phonon-added coherent states of a mechanical resonator.
//!
//! Module map:
//!
//! - [`params`]: device and drive parameters, derived pulse scalars, timing checks
//! - [`meanfield`]: first-moment Langevin dynamics and its harmonic steady state
//! - [`fluctuations`]: linearized noise, steady covariance, probe modulation
//! - [`fock`]: truncated Fock-space oracle for the write, herald and readout stages
//! - [`analytics`]: closed-form Mandel Q and quadrature variance of the readout field

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod fluctuations;
pub mod fock;
pub mod meanfield;
pub mod ode;
pub mod params;
pub mod quad;

pub use error::{Error, Result};
pub use params::{DriveParams, PulseKind, PulseSequence, PulseSpec, SystemParams};
