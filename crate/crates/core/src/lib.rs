//! CAD shape retrieval with a joint image + point-cloud encoder.
//!
//! Meshes are rendered from a ring of cameras and sampled into point clouds;
//! a small MobileNetV2-style image branch and a PointNet-style point branch
//! are trained jointly, and the concatenated penultimate activations serve as
//! the retrieval embedding searched by exhaustive Euclidean k-NN.

// `!(x > 0.0)` style checks are how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod exec;
pub mod geometry;

pub use error::{Error, Result};
pub use exec::Exec;
pub mod datasets;
pub mod linalg;
pub mod nn;
pub mod pipeline;
pub mod render;
pub mod retrieval;
pub mod seeds;
