//! File formats, dataset layout, synthetic data and the active-learning
//! experiment harness built on `edgeal-core`.

pub mod config;
pub mod dataset;
mod error;
pub mod experiment;
pub mod io;
pub mod precomputed;
pub mod summary;
pub mod synth;

pub use edgeal_core as core;
pub use error::{Error, Result};
