//! Mask-grounded video scene graph toolkit: mask algebra, proposal
//! filtering, online/offline tracking, synthetic scenes, trajectory token
//! arrangement, the perceiver resampler and scene-graph evaluation.

pub mod error;
pub mod eval;
pub mod io;
pub mod mask_ops;
pub mod model;
pub mod proposal;
pub mod resampler;
pub mod suite;
pub mod synth;
pub mod tokens;
pub mod tracker;

pub use error::{Error, Result};
pub use model::{BinaryMask, MaskVideo, ObjectId, Registry, SceneGraph, Trajectory};
