//! Music-driven dance synthesis.
//!
//! Motion is organised in three levels: per-frame skeleton poses, beat-aligned
//! motion words clustered into motifs, and a choreography sampler that orders
//! motifs so that the long-run motif histogram (the signature) follows a genre
//! template.
//!
//! The math in [`quat`], [`motion`] and the signature helpers is generic over
//! [`Real`]; the pipeline types below fix the scalar to `f64`.

pub mod audio;
pub mod choreography;
pub mod error;
pub mod eval;
pub mod io;
pub mod motif;
pub mod motion;
pub mod quat;
pub mod rng;
pub mod scalar;
pub mod synthesis;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vector3 = quat::Vec3<f64>;
pub type Quat = quat::Quaternion<f64>;
pub type Skeleton = motion::Skeleton<f64>;
pub type Pose = motion::SkeletonPose<f64>;
pub type Clip = motion::MotionClip<f64>;

/// Frame rate all corpus data is brought to.
pub const DEFAULT_FPS: f64 = 30.0;
/// Joint count of the reference capture skeleton.
pub const REFERENCE_JOINTS: usize = 31;
/// Length motion words are time-scaled to before embedding (140 bpm at 30 fps).
pub const WORD_FRAMES: usize = 13;
/// Embedding dimension.
pub const EMBEDDING_DIM: usize = 184;
/// Number of motif clusters.
pub const MOTIF_COUNT: usize = 500;
/// Style gain applied to the AdaIN parameters.
pub const STYLE_GAIN: f64 = 40.0;
