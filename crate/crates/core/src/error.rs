use thiserror::Error;

/// Errors raised by the estimation, inference and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("grid has {n_points} points, derivative of order {order} needs at least {}", order + 2)]
    GridTooCoarse { n_points: usize, order: usize },

    #[error("curves live on different grids")]
    GridMismatch,

    #[error("kernel argument must be nonnegative, got {0}")]
    NegativeArgument(f64),

    #[error("no observed response inside the bandwidth (h = {h})")]
    EmptyNeighborhood { h: f64 },

    #[error("empirical small-ball probability F_x(h) is zero (h = {h})")]
    DegenerateBall { h: f64 },

    #[error("estimated observation probability p(x) is zero")]
    ZeroMissingness,

    #[error("conditional density estimate hit its floor ({floor:e}); interval is unreliable")]
    DensityFloorHit { floor: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid simulation spec: {0}")]
    SpecInvalid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("summary of an empty sample")]
    EmptyInput,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
