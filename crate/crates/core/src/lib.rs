//! Two-photon positron annihilation timing.
//!
//! Generates para-positronium annihilation events with per-photon emission
//! times, evaluates the closed-form densities that govern them, fits
//! coincidence timing spectra with competing shapes and numerically checks
//! the integrals behind the double-exponential coincidence law.
//!
//! Canonical units throughout are ps (time), mm (length) and keV (energy).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod distributions;
mod error;
pub mod kinematics;
pub mod montecarlo;
pub mod oracles;
pub mod quadrature;
pub mod units;

pub use error::{Error, Result};
pub use kinematics::{PhotonPair, Vec3};
pub use units::PhysicalParams;
