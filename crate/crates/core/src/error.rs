use thiserror::Error;

pub type Result<T> = std::result::Result<T, NsvhError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NsvhError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("lambda = {0} is not supported by this operation")]
    UnsupportedLambda(f64),

    #[error("correlation |rho| = {0} is too close to 1 for this formula")]
    DegenerateCorrelation(f64),

    #[error("alpha = 0: the closed form needs a positive vol-of-vol")]
    ZeroVolOfVol,

    #[error("no solution: {0}")]
    NoSolution(String),

    /// Target moments outside the attainable region. `boundary_*` describe the
    /// |rho| = 1 parameter set at the lower end of the admissible `w` range.
    #[error("infeasible moments: {reason} (minimal attainable excess kurtosis {min_exkurt:.6})")]
    InfeasibleMoments {
        reason: String,
        min_exkurt: f64,
        boundary_s_var: f64,
        boundary_rho: f64,
    },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
}

impl NsvhError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        NsvhError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
