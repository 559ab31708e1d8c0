//! Microring/racetrack resonator design toolkit for atom-light interfaces.
//!
//! The crate models the full chain from waveguide cross-section to single-atom
//! cooperativity: vectorial eigenmode solving, back-scattering-coupled
//! resonances, two-color evanescent and top-illumination trap potentials,
//! surface-scattering loss, and geometry optimization sweeps.

pub mod cli;
pub mod cqed;
pub mod domain;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod loss;
pub mod modes;
pub mod multilayer;
pub mod potential;
pub mod resonator;
pub mod stark;
pub mod trap;

pub use error::{Error, Result};
