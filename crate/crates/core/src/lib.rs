//! Eigenstate preparation on spin-1/2 XX chains by adiabatic preconditioning
//! followed by Rodeo Algorithm purification, simulated exactly within a
//! fixed-magnetization sector.

pub mod cli;
pub mod error;
pub mod fusion;
pub mod propagate;
pub mod rodeo;
pub mod spectral;
pub mod spin_model;

pub use error::{Error, Result};
