//! Monte-Carlo toolkit for additive functionals of discrete-time processes
//! and their characteristics: random sources, scaled chains, functional
//! kernels, transition characteristics and distributional diagnostics.

pub mod characteristics;
pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod processes;
pub mod quad;
pub mod sources;

pub use error::{Error, Result};
