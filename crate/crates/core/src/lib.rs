//! Haar-random isometric tensor networks: Riemannian gradient statistics,
//! doubled-channel spectra and Riemannian optimization.

pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod mera;
pub mod legs;
pub mod moments;
pub mod mps;
pub mod optimize;
pub mod parallel;
pub mod riemann;
pub mod spectra;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
