use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate quaternion (norm {0:e})")]
    DegenerateQuaternion(f64),
    #[error("skeleton mismatch: {0}")]
    SkeletonMismatch(String),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("bvh line {line}: {message}")]
    Bvh { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("not enough data: {0}")]
    TooFew(String),
    #[error("degenerate word: {0}")]
    DegenerateWord(String),
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("motif id {id} out of range for K = {k}")]
    MotifOutOfRange { id: usize, k: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
