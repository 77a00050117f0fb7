//! Exact solution of critical dense polymers on a strip.

pub mod error;
pub mod linkstates;
pub mod qseries;
pub mod registry;
pub mod scaling;
pub mod spectra;
pub mod tangle;
pub mod transfer;

pub use error::{Error, Result};
