use thiserror::Error;

/// Errors produced across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("need more than 6 correspondences for the DLT (N > 6), got {0}")]
    TooFewCorrespondences(usize),

    #[error("only {visible} of {requested} sampled points project inside the image")]
    InsufficientVisiblePoints { visible: usize, requested: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least 7 correspondences with weight > 1e-6, got {0}")]
    InsufficientSupport(usize),

    #[error("degenerate eigen-system: two smallest eigenvalues {lambda0:e} and {lambda1:e} are not separated")]
    DegenerateEigen { lambda0: f64, lambda1: f64 },

    #[error("degenerate rotation block: singular value trace {0:e}")]
    DegenerateRotation(f64),

    #[error("cheirality check failed: the most confident correspondence has non-positive depth")]
    Cheirality,

    #[error("no RANSAC hypothesis reached 7 inliers")]
    NoConsensus,

    #[error("source and target views overlap on {percent:.1}% of source pixels")]
    NoOverlap { percent: f64 },

    #[error("fewer than 6 inliers ({0}) during refinement")]
    InsufficientInliers(usize),

    #[error("Levenberg-Marquardt stalled on singular normal equations")]
    LmStall { best: Box<crate::geometry::Pose> },

    #[error("eigenvalue gap too small for a stable eigenvector derivative")]
    EdGradientUnstable,

    #[error("optimization diverged at iteration {iteration}: loss {loss:e} (initial {initial:e})")]
    Diverged {
        iteration: usize,
        loss: f64,
        initial: f64,
    },

    #[error("correlation undefined: zero variance")]
    UndefinedCorrelation,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
