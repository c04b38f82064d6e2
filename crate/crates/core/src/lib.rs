//! Fixation probabilities of the Moran process on directed graphs, with
//! specialised support for superstars.
//!
//! - [`graph`]: graph construction and validation.
//! - [`engine`]: Monte Carlo simulation to absorption.
//! - [`exact`]: linear-algebra solutions and closed forms.
//! - [`stats`]: confidence intervals and experiment grids.

pub mod engine;
pub mod error;
pub mod exact;
pub mod graph;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
