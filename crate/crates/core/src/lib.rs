//! Correlated Markov quantum walks on `Z^d`.
//!
//! A walker with internal state in `ℂ^{2d}` is updated by coins drawn from a
//! finite set, driven in time by a stationary Markov chain and in space by a
//! site representation. The crate provides exact evolution for fixed disorder,
//! the fibered transfer operator whose powers give the disorder-averaged
//! characteristic function, and the spectral data (drift, diffusion matrix,
//! deviation rate functions) extracted from it.

pub mod config;
pub mod deviations;
pub mod error;
pub mod evolution;
pub mod family;
pub mod fixtures;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod permutation;
pub mod rng;
pub mod spectral;
pub mod transfer;
pub mod uncorrelated;

pub use error::{Error, Result};
