use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("field lives on mesh {field} but mesh {mesh} was supplied")]
    MeshMismatch { field: u64, mesh: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point ({x}, {y}) lies outside every source element (geometry mismatch)")]
    PointLocation { x: f64, y: f64 },

    #[error("singular factorization: pivot {index} has magnitude {magnitude:e} (scale {scale:e})")]
    SingularPivot { index: usize, magnitude: f64, scale: f64 },

    #[error("linear solve missed residual contract: relative residual {0:e}")]
    Residual(f64),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
