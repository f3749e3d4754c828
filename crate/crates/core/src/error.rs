use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate distribution")]
    DegenerateDistribution,

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("requested {k} eigenpairs of a {n}x{n} matrix")]
    TooManyEigenpairs { k: usize, n: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid problem:\n  {}", .0.join("\n  "))]
    InvalidProblem(Vec<String>),

    #[error("missing ground truth")]
    MissingGroundTruth,

    #[error("degenerate affinity: {0}")]
    DegenerateAffinity(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
