//! Numerical laboratory for damped wave semigroups on truncated spectral
//! models: control estimates, resolvent growth, dilation to fractional
//! propagators and energy decay.

pub mod damping;
pub mod dilation;
pub mod error;
pub mod evolution;
mod fourier;
pub mod control;
pub mod linalg;
pub mod regression;
pub mod resolvent;
pub mod spectral;

pub use error::{LabError, Result};

/// Crate version, recorded in report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
