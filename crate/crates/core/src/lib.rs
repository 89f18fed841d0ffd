//! Spectral reconstruction-risk scores for shared gradients and embeddings,
//! the attacks they bound, and the noise and compression defenses they rank.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod network;
pub mod shared_map;
pub mod attack;
pub mod cli;
pub mod risk;
pub mod defense;
pub mod metrics;
pub mod harness;
pub mod io;

pub use error::{Error, Result};
