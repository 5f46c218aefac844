//! Singular learning theory tooling for Gibbs posteriors: loss models,
//! Bernstein constants, exact RLCT computation, partition-function
//! estimation and PAC-Bayes certificates.

pub mod bernstein;
pub mod error;
pub mod experiment;
pub mod gibbs;
pub mod linalg;
pub mod mcmc;
pub mod model;
pub mod partition;
pub mod quadrature;
pub mod rlct;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
