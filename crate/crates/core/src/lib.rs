//! Simulation of a linear-optical CNOT gate built from two unbalanced
//! interferometers and a two-photon coincidence window.
//!
//! The control photon's polarization picks the short or long path of a
//! PBS interferometer; the target photon goes through a BS interferometer
//! whose long path flips its polarization. Keeping only pairs that reach
//! the detectors within a window shorter than the path delay leaves the
//! CNOT action with probability 1/4.

pub mod circuits;
pub mod cli;
pub mod config;
pub mod elements;
pub mod error;
pub mod measurement;
pub mod montecarlo;
pub mod state;

pub use error::{Error, Result};
