//! Numerical laboratory for the interacting fermionic chain with a
//! quasi-periodic cosine potential: Diophantine certification of the
//! frequency, single-particle diagnostics, exact grand-canonical
//! diagonalization, the infrared scale decomposition, counterterm tuning
//! and decay analysis.
//!
//! Everything is generic over [`scalar::Real`]; the aliases below fix the
//! scalar to `f64`, which is what the command-line tool uses.

pub mod analysis;
pub mod counterterm;
pub mod diophantine;
pub mod error;
pub mod linalg;
pub mod many_body;
pub mod model;
pub mod multiscale;
pub mod quadrature;
pub mod scalar;
pub mod single_particle;

pub use error::{Error, Result};

pub type ModelParams = model::ModelParams<f64>;
pub type DiophantineFrequency = diophantine::DiophantineFrequency<f64>;
pub type SpectralDecomposition = many_body::SpectralDecomposition<f64>;
pub type CorrelationFunction = many_body::CorrelationFunction<f64>;
pub type ScaleFamily = multiscale::ScaleFamily<f64>;
pub type CountertermResult = counterterm::CountertermResult<f64>;
pub type DecayFit = analysis::DecayFit<f64>;
pub type PhasePoint = analysis::PhasePoint<f64>;
