//! Spectral simulation of Willmore gradient flows of immersed spheres in R³.
//!
//! Surfaces are parametrized over the round sphere and represented by their
//! spherical-harmonic coefficients. The crate provides the induced geometry,
//! the Willmore operator in several equivalent forms, the Möbius gauge
//! machinery (well-balancing and conformal tangential velocities), time
//! integrators for the conformal, normal and DeTurck-gauged flows, Hodge
//! potential diagnostics and a batch front end.

pub mod cli_io;
pub mod error;
pub mod exec;
pub mod flow;
pub mod gauge;
pub mod geometry;
pub mod hodge;
pub mod sphere;
pub mod willmore;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testing;
