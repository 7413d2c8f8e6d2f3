use thiserror::Error;

/// Errors raised by table handling, fitting and post-processing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error(
        "{kind} total for {name:?} is zero; the {method} null-count estimator is undefined \
         (use the other estimator or collapse sparse rows/columns)"
    )]
    ZeroMargin { kind: &'static str, name: String, method: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in cell ({row}, {col}), component {component}")]
    NonFinite { row: usize, col: usize, component: usize },

    #[error("all likelihood entries vanish for cell ({row}, {col}); widen the support grid")]
    EmptyLikelihood { row: usize, col: usize },

    #[error("penalized Hessian is not negative definite; try a larger penalty c0")]
    SingularHessian,

    #[error("no converged fit among {grid_points} grid points\n{report}")]
    NoConvergedFit { grid_points: usize, report: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
