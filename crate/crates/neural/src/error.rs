use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error("loss became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] choreo_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;
