//! Funk–Radon inversion on the unit sphere through a frame decomposition.

pub mod cli;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod harmonics;
pub mod phantom;
pub mod radon;
pub mod sobolev;

pub use error::{Error, Result};
