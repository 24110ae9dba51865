//! Twisted translates on the phase plane, Weyl kernels, and left translates on the
//! Heisenberg group, with finite-section frame diagnostics.

pub mod cli;
pub mod error;
pub mod frames;
pub mod grid;
pub mod heisenberg;
pub mod report;
pub mod spectral;
pub mod twisted;
pub mod weyl;

pub use error::{Error, Result};
