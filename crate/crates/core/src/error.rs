use crate::jets::JetError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point {0:?} lies outside the chart domain of {1}")]
    OutOfDomain(Vec<f64>, &'static str),
    #[error("metric not positive definite at {0:?}")]
    MetricNotPositiveDefinite(Vec<f64>),
    #[error("induced metric degenerate: immersion fails the rank check")]
    DegenerateImmersion,
    #[error("isotropy check failed: residual {0:e}")]
    Isotropy(f64),
    #[error("flow left numeric range")]
    FlowDiverged,
    #[error("node {chart}:{index} failed: {source}")]
    Node {
        chart: usize,
        index: usize,
        source: Box<Error>,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
