use thiserror::Error;

use crate::geometry::Point2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("evaluation at {point} is within {distance:.3e} of the singular point {singularity}")]
    Singular {
        point: Point2,
        singularity: Point2,
        distance: f64,
    },

    #[error("point {0} lies outside the chart domain")]
    OutOfDomain(Point2),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient vanishes at {point} (|grad u| = {norm:.3e})")]
    ZeroGradient { point: Point2, norm: f64 },

    #[error("unknown catalog field `{0}`")]
    UnknownField(String),

    #[error("level tracing failed: {0}")]
    Tracing(String),

    #[error("level {level} is not a closed curve inside the domain: {reason}")]
    Topology { level: f64, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations (last update {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-integrable length element: {0}")]
    NonIntegrable(String),

    #[error("factor is not normalized at the origin: {0}")]
    Normalization(String),
}
