use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("degenerate triangle {face}: area {area:e} below threshold {threshold:e}")]
    MeshDegenerate {
        face: usize,
        area: f64,
        threshold: f64,
    },

    #[error("multiplier undefined: volume gradient vanishes")]
    UndefinedMultiplier,

    #[error("need at least {needed} converged consecutive rows, found {found}")]
    InsufficientRows { needed: usize, found: usize },

    #[error("preconditioner factorization failed: {0}")]
    Factorization(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("plot: {0}")]
    Plot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
