use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("structure validation failed:\n{0}")]
    Validation(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("degenerate coefficient matrix: {0}")]
    Singular(String),

    #[error("incompatible right-hand side: group residuals {0:?} exceed tolerance {1:e}")]
    Incompatible(Vec<f64>, f64),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("eigensolve failed: {0}")]
    Eigen(String),

    #[error("series iteration diverged: {0}")]
    Divergence(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
