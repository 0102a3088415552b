use thiserror::Error;

/// Errors raised by the rate-channel toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidPmf(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid density operator: {0}")]
    InvalidOperator(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("typical set is empty for n = {n}, delta = {delta}")]
    EmptyTypicalSet { n: usize, delta: f64 },

    #[error("fallback sequence is typical; P_U is too close to a point mass for delta = {0}")]
    TypicalFallback(f64),

    #[error("linear system is infeasible (least-squares residual {0:.3e})")]
    Infeasible(f64),

    #[error("active-set correction did not converge within {0} rounds")]
    IterationCap(usize),

    #[error("distortion level {level} outside achievable range [{min}, {max}]")]
    DistortionOutOfRange { level: f64, min: f64, max: f64 },

    #[error("exact evaluation needs {needed:.3e} elementary evaluations, budget is {budget:.3e}")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
