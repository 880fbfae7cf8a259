//! k-core finding processes on random graphs, their limit-theorem predictions,
//! and Monte Carlo checks of those predictions.

pub mod covariance;
pub mod degree;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod peel;
pub mod poisson;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod threshold;

pub use error::{Error, Result};
