use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The model document could not be parsed.
    #[error("config syntax error: {0}")]
    Syntax(String),

    /// A parameter is outside its admissible domain.
    #[error("invalid config: {0}")]
    Invalid(String),

    /// A parameter combination violates one of the model conditions.
    #[error("{message} violates assumption {assumption}")]
    Assumption {
        assumption: &'static str,
        message: String,
    },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("non-finite value in {context} at {location}")]
    NonFinite { context: String, location: String },

    #[error("value iteration did not converge after {iterations} iterations (last residual {last_residual:e})")]
    Divergence {
        iterations: usize,
        last_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("entry condition unsatisfiable in budget: {0}")]
    EntryBracket(String),

    #[error("stationary distribution did not converge after {iterations} iterations (last step {last_step:e})")]
    StationaryNonConvergence { iterations: usize, last_step: f64 },

    #[error("exit threshold is infinite at price {0}")]
    NoExitThreshold(f64),

    #[error("no positive tail index: {0}")]
    NoTailIndex(String),

    #[error("hill estimator: {0}")]
    Hill(String),

    #[error("occupation measure unreliable: all {0} paths censored")]
    AllCensored(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
