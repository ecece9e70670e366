use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("radius {radius} too large for torus of side {side}: {reason}")]
    RadiusTooLarge {
        radius: usize,
        side: usize,
        reason: &'static str,
    },

    #[error("invalid site set: {0}")]
    InvalidSiteSet(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("site {0} has no outgoing conductance")]
    IsolatedSite(usize),

    #[error("nearest-neighbour conductance between {0} and {1} is zero")]
    ZeroConductance(usize, usize),

    #[error("environment is disconnected ({reached} of {total} sites reachable from the origin)")]
    Disconnected { reached: usize, total: usize },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
