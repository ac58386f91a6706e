//! Pose-based tremor classification with a skeletal graph network.
//!
//! The pipeline runs from detector keypoints ([`pose`]) through the fixed
//! upper-limb graph ([`graph`]) and the network ([`model`]) to training
//! ([`train`]) and clip-to-video evaluation ([`eval`]). [`synth`] produces
//! deterministic synthetic videos for testing.

// Negated comparisons (`!(x > 0.0)`) are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod model;
pub mod pose;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
