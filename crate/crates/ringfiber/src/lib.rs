//! Photon-pair generation by quasi-phase-matched down-conversion in a ring-core fiber.

pub mod cli;
pub mod config;
pub mod entangle;
pub mod error;
pub mod materials;
pub mod modesolver;
pub mod oam;
pub mod qpm;
pub mod quadrature;
pub mod spdc;
pub mod specfun;
pub mod units;

pub use error::{Error, Result};
