//! Image branch, point branch, joint head and their training.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod network;
pub mod ops;
mod train;

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

pub use network::{
    classify_joint, classify_views, encode_points, encode_views, joint_feature, ArchConfig,
    BlockSpec, Branches, FeatureVector, GradScope, Inference, Modality, ModelWeights, Network,
    ParamGroup,
};
pub use train::{
    evaluate, train, train_from, train_phase, EpochStats, Example, TrainConfig, TrainReport, ValidationSummary,
};

/// Floating-point element type of network tensors. Training runs in `f32`;
/// gradient checks run the same code in `f64`.
pub trait Scalar:
    num_traits::Float + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static
{
    fn of(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
}
