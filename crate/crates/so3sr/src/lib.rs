//! Exact recovery of Dirac measures on SO(3) from degree-N Wigner D-moments:
//! localized B-spline kernels with explicit constants, Hermite-interpolation
//! dual certificates and a gridded ℓ1 recovery pipeline.

pub mod certificate;
pub mod cli;
pub mod error;
pub mod filter;
pub mod kernel;
pub mod recovery;
pub mod rng;
pub mod so3;
pub mod wigner;

pub use error::{Error, Result};
