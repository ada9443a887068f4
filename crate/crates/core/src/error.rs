use thiserror::Error;

/// Every fallible operation in the crate returns this error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("parameter mismatch: expected {expected} values, found {found}")]
    ParamMismatch { expected: usize, found: usize },

    #[error("unresolvable element: {0}")]
    Unresolvable(&'static str),

    #[error("infeasible start: objective is -inf at the starting point")]
    InfeasibleStart,

    #[error("stuck chain: zero acceptances over {burnin} burn-in steps (log density at start = {start_log_density})")]
    StuckChain { burnin: usize, start_log_density: f64 },

    #[error("unbracketable: CDF root not bracketed after {doublings} doublings (target {target})")]
    Unbracketable { doublings: usize, target: f64 },

    #[error("insufficient draws: need at least {needed}, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("region mass too small: {rejections} consecutive rejections")]
    RegionMassTooSmall { rejections: usize },

    #[error("inconsistent inverse: f_inv(f(x)) deviates from x by {deviation:e} at {point:?}")]
    InconsistentInverse { point: Vec<f64>, deviation: f64 },

    #[error("collinear design: X'X is singular")]
    CollinearDesign,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("not at an interior maximum: Hessian eigenvalues {eigenvalues:?}")]
    NotInteriorMaximum { eigenvalues: Vec<f64> },

    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },

    #[error("non-finite objective at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("too many failed replicates: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("bad keyword `{keyword}` for {function}: {reason}")]
    BadKeyword {
        function: String,
        keyword: String,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn space(left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::SpaceMismatch {
            left: left.into(),
            right: right.into(),
        }
    }
}
