//! Second-order asymptotic expansions for quadratic forms of Wiener and
//! diffusion paths, with Monte Carlo validation against exact oracles.

pub mod accum;
pub mod density;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod malliavin;
pub mod model;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod symbols;

pub use error::{Error, Result};
