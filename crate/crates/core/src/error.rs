use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The first fundamental form is (numerically) singular.
    #[error("degenerate geometry at reference point ({xi}, {eta}): det G = {det:e}")]
    GeometryDegenerate { xi: f64, eta: f64, det: f64 },

    #[error("invalid composite surface: {0}")]
    InvalidSurface(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh construction failed: {0}")]
    Mesh(String),

    #[error("unsupported polynomial degree {0} (only 1 and 2)")]
    UnsupportedDegree(usize),

    #[error("unsupported quadrature order {0}")]
    UnsupportedOrder(usize),

    /// Cholesky failed: the assembled matrix is not positive definite.
    #[error("system matrix is not positive definite: {0}")]
    Indefinite(String),

    #[error("iteration did not converge within {iterations} steps")]
    NotConverged { iterations: usize },

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("comparison not defined: {0}")]
    Comparison(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
