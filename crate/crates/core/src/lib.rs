//! Random column embeddings `A = (X_1, .., X_n) / sqrt(m)`: sampling models,
//! distortion over test sets, sparse overlap statistics, and the decoupling
//! quantities used to control them.

pub mod decoupling;
pub mod distortion;
pub mod embedding;
pub mod error;
mod linalg;
pub mod rng;
pub mod set_geometry;
pub mod sparse_overlap;
pub mod subset;
pub mod vector_models;

pub use error::{Error, Result};
