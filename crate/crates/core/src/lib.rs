//! Numerical toolkit for one-shot decoupling and quantum state merging.

pub mod error;
pub mod linalg;
pub mod sdp;
pub mod entropy;
pub mod channel;
pub mod haar;
pub mod config;
pub mod decoupling;
pub mod merging;
pub mod states;
pub mod stats;

pub use error::{Error, Result};
