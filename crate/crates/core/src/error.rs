use thiserror::Error;

/// Errors raised by the lab's operations.
///
/// Failed property checks are never errors: they are recorded as
/// violations inside an [`ExperimentReport`](crate::report::ExperimentReport).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("space `{0}` declares no sampler domain")]
    UnsupportedSpace(String),

    #[error("polyhedral directions do not span R^{dim}")]
    DegenerateNorm { dim: usize },

    #[error("invalid norm specification: {0}")]
    InvalidNorm(String),

    #[error("base point ({s}, {t}) lies outside the strip R x [0,1]")]
    OutOfDomain { s: f64, t: f64 },

    #[error("point is not an element of space `{0}`")]
    InvalidPoint(String),

    #[error("tracks belong to different spaces: `{0}` and `{1}`")]
    DomainMismatch(String, String),

    #[error("tuple lengths differ: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("tuple length {n} is outside the supported range 1..={cap}")]
    TupleSize { n: usize, cap: usize },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("isometry is not hyperbolic at this point (displacement {0:e})")]
    NotHyperbolic(f64),

    #[error("the two lines meet: d(xi({s}), xi'({s2})) = {distance:e}")]
    DisjointnessViolated { s: f64, s2: f64, distance: f64 },

    #[error("six distances do not form a metric: {0}")]
    NotAMetric(String),

    #[error("translation length of direction {direction:?} is {length:e}, expected non-zero")]
    ZeroLength { direction: Vec<i64>, length: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
