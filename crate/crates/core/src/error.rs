use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single problem found while reading or validating a model, with the path of
/// the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model ({} problem(s)): {}", .0.len(), join(.0))]
    InvalidModel(Vec<FieldError>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature grid too small: N = {given}, need at least {minimum}")]
    GridTooSmall { given: usize, minimum: usize },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("window overflow: walker reached site {site:?} outside half-width {half_width}")]
    WindowOverflow { site: Vec<i64>, half_width: i64 },

    #[error("spectral hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("eigenvalue branch collision at k = {k:?}: best overlap {overlap:.3}")]
    BranchCollision { k: Vec<String>, overlap: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn join(v: &[FieldError]) -> String {
    v.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
