use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),

    #[error("tolerance not reached after {subdivisions} subdivisions (value {value:e}, error estimate {error_estimate:e})")]
    ToleranceNotReached {
        value: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("non-finite integrand value {value} at x = {x:e}")]
    NonFiniteIntegrand { x: f64, value: f64 },

    #[error("integral appears to diverge: {0}")]
    DivergenceSuspected(String),

    #[error("moment of order {order} diverges for this model")]
    DivergentMoment { order: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("derivative unavailable: {0}")]
    DerivativeUnavailable(String),

    #[error("integrability condition FG1 fails: {0}")]
    Fg1Failure(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
