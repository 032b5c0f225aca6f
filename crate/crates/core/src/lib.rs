//! Rare-pattern statistics for lattice Gibbs random fields.

pub mod codec;
pub mod dobrushin;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod laws;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
