use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("covariance matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("degenerate Gram matrix after {attempts} draw(s): smallest/largest eigenvalue ratio {ratio:e}")]
    DegenerateGram { attempts: usize, ratio: f64 },

    #[error("singular Gram matrix")]
    SingularGram,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inverse moment of order {order} is infinite for {k} degrees of freedom")]
    MomentNotFinite { k: u32, order: u32 },

    #[error("aspect ratio t = {0} is outside [0, 1)")]
    AspectRatio(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
