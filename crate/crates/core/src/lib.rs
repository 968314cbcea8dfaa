//! Laser speckle simulation, Gabor key extraction and the closed-form
//! statistics of speckle-based keys.

pub mod detector;
pub mod error;
pub mod gabor;
pub mod ingest;
pub mod montecarlo;
pub mod propagate;
pub mod rng;
pub mod source;
pub mod theory;

pub use error::{Error, Result};
