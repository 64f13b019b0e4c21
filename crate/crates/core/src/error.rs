//! Library error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown variable `{name}` at position {pos}")]
    UnknownVariable { pos: usize, name: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("non-isolated solutions: {0}")]
    NonIsolated(String),
    #[error("degenerate linear part: {0}")]
    Degenerate(String),
    #[error("not exactly representable: {0}")]
    NotExact(String),
    #[error("tracing failed: {0}")]
    Tracing(String),
    #[error("pole proximity: |den| = {value:.3e} below tolerance {tol:.3e}")]
    PoleProximity { value: f64, tol: f64 },
    #[error("quadrature error {error:.3e} above tolerance {tol:.3e}")]
    Quadrature { error: f64, tol: f64 },
    #[error("holonomy failed: {0}")]
    Holonomy(String),
    #[error("extrapolation did not converge: {0}")]
    Extrapolation(String),
    #[error("samples too sparse: {0}")]
    Sparse(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
