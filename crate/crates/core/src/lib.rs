//! Edge-prior active learning for semantic segmentation.
//!
//! This crate holds the allocation-only core: the EALT tensor codec, Sobel
//! edge priors, MC-dropout aggregation with edge-contextual calibration,
//! SEEDS-style superpixels, region acquisition, the simulated oracle, a small
//! per-pixel MC-dropout learner and the dice metric. It is `no_std` and needs
//! only `alloc`; file IO, dataset layout and the experiment harness live in
//! the `edgeal` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod baselines;
pub mod edge;
mod error;
pub mod grid;
pub mod labels;
pub mod learner;
pub mod metrics;
pub mod rng;
pub mod round;
pub mod superpixel;
pub mod tensor;
pub mod uncertainty;

pub use error::{Error, Result};
pub use grid::Grid;
