use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The parameter vector is identically zero where a nonzero norm is required.
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("normalizing matrix of the penalized objective is singular")]
    SingularNormalizer,

    #[error("covariate `{column}` has zero residual variance; scaled estimand undefined")]
    DegenerateScaling { column: String },

    #[error("positivity violation: {0}")]
    Positivity(String),

    #[error("fold stratification failed: {0}")]
    FoldStratification(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("division by zero observed mean for provider `{provider}`")]
    ZeroDenominator { provider: String },

    #[error("empty cell: {0}")]
    EmptyCell(String),

    #[error("coordinate descent did not converge within {max_iter} iterations (lambda = {lambda})")]
    Convergence { lambda: f64, max_iter: usize },

    #[error("design has {n_rows} rows and {n_cols} columns; use a ridge or lasso learner")]
    Underdetermined { n_rows: usize, n_cols: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("study failed: {skipped} of {reps} replications skipped (limit 5%)")]
    StudyFailed { skipped: usize, reps: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
