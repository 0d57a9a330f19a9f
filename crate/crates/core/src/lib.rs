//! Finite-width corrections to wide single-layer networks viewed as
//! Gaussian processes: ensemble sampling, exact kernels, Wick sums, connected
//! correlators, quartic-coupling extraction and its cutoff dependence.

pub mod config;
pub mod correlators;
pub mod eft;
pub mod error;
pub mod fit;
pub mod kernels;
pub mod quadrature;
pub mod rg;
pub mod sampler;
pub mod stats;
pub mod symmetric;
pub mod wick;

pub use error::{Error, Result};
