//! Material loss extraction for multi-mode superconducting resonators.
//!
//! The crate links internal quality factors of several resonant modes to three
//! material loss factors (surface resistance, scaled surface-oxide loss
//! tangent, seam resistance per unit length) through a linear participation
//! model, and inverts that model with weighted least squares, non-negative
//! least squares and seeded Monte-Carlo sampling. It also evaluates measurement
//! sensitivity over the loss space, predicts quality factors and loss budgets,
//! fits resonance parameters from reflection spectra and infers the assembly
//! gap of a resonator from its mode frequencies.
//!
//! Everything here is allocation-only `no_std`; file formats, parallel drivers
//! and the command line live in the `resolveq` crate.
#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod device;
pub mod error;
pub mod extraction;
pub mod fixtures;
pub mod gap;
mod linalg;
pub mod loss_model;
pub mod sensitivity;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
pub use loss_model::{
    Channel, MaterialLossVector, ModeMeasurement, OxideAssumptions, ParticipationMatrix,
    ParticipationRow, CHANNELS,
};
