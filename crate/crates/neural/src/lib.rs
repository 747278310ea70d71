//! Pose-level generator: a stacked LSTM conditioned on rhythm, motif and the
//! previous pose, trained with coherence, auto-conditioned and perceptual
//! losses.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod grad;
pub mod gradcheck;
pub mod loss;
pub mod net;
pub mod rollout;
pub mod toy;
pub mod train;

pub use config::NetConfig;
pub use error::{NeuralError, Result};
pub use loss::{loss_coherence, loss_perceptual, total_loss, Frame, TermWeights};
pub use net::{Dims, LstmState, Params, PoseNet, StepOutput, Tensor};
pub use data::{TrainSequence, Window, WordTarget};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use train::{batch_loss, teacher_forced_error, train, train_with, LossBreakdown, TrainData, TrainOptions, TrainReport};
pub use rollout::{frames_to_clip, rollout};
