use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("{value} lies outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("scenario failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("Picard iteration did not converge at t = {t} (dt = {dt}, residual = {residual:e})")]
    StepFailure { t: f64, dt: f64, residual: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("no snapshot recorded at t = {0}")]
    Lookup(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
