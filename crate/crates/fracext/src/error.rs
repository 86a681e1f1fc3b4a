use thiserror::Error;

pub type Result<T> = std::result::Result<T, FracError>;

#[derive(Debug, Error)]
pub enum FracError {
    #[error("configuration error in `{field}`: expected {expected}, got {got}")]
    Config {
        field: String,
        expected: String,
        got: String,
    },
    #[error("gamma = 1/2 is excluded: the extension problem degenerates into logarithmic terms")]
    GammaHalf,
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("homogeneous solve failed: {message}")]
    Solver {
        message: String,
        /// Unresolved remainder, serialized as an atom-sum JSON document.
        remainder: Option<serde_json::Value>,
    },
    #[error("invalid metric jet: {0}")]
    Metric(String),
    #[error("non-minimal metric jet: trace of the first normal derivative is {0:e}")]
    NonMinimal(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FracError {
    pub fn config(field: impl Into<String>, expected: impl Into<String>, got: impl ToString) -> Self {
        FracError::Config {
            field: field.into(),
            expected: expected.into(),
            got: got.to_string(),
        }
    }

    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            FracError::Config { .. }
            | FracError::GammaHalf
            | FracError::Metric(_)
            | FracError::NonMinimal(_)
            | FracError::Io(_)
            | FracError::Json(_) => 3,
            FracError::Precondition(_) | FracError::Evaluation(_) => 3,
            FracError::Solver { .. } | FracError::Numerical(_) => 4,
        }
    }
}
