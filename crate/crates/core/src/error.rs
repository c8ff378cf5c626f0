use thiserror::Error;

#[derive(Debug, Error)]
pub enum FveError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("newton iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("dual parameters violate ordering: {0}")]
    OrderingViolation(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("constraint system is singular (condition number {0:e})")]
    SingularConstraintSystem(f64),

    #[error("residual polynomial has a complex or out-of-range root: {0}")]
    ComplexOrOutOfRangeRoot(String),

    #[error("point ({0}, {1}) lies outside the domain or element")]
    OutsideDomain(f64, f64),

    #[error("linear solve failed: relative residual {residual:e} {detail}")]
    SolverFailure { residual: f64, detail: String },

    #[error("norm `{0}` underflowed to zero; order undefined")]
    ZeroError(String),

    #[error("no reference value for {0}")]
    MissingReferenceCell(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FveError>;
