pub mod data;
pub mod error;
pub mod mcmc;
pub mod partition;
pub mod pipeline;
pub mod regression;
pub mod simulation;
pub mod survival;
pub mod weighting;

pub use error::{Error, Result};
