use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular pivot at row {row}")]
    SingularPivot { row: usize },
    #[error("reference norm is zero")]
    ZeroDenominator,
    #[error("non-finite value in {context} at step {step}")]
    NonFinite { context: &'static str, step: usize },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({max_steps}) exceeded at t = {t}")]
    MaxStepsExceeded { max_steps: usize, t: f64 },
    #[error("derivative vanished at iteration {iteration}")]
    DerivativeVanished { iteration: usize },
    #[error("flat secant at iteration {iteration}")]
    FlatSecant { iteration: usize },
    #[error("line search failed after {backtracks} backtracks")]
    LineSearch { backtracks: usize },
    #[error("starting point violates the bounds")]
    InfeasibleStart,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty data split")]
    EmptySplit,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
