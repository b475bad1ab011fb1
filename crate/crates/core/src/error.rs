use thiserror::Error;

pub type Result<T> = std::result::Result<T, FlowError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid gas model: {0}")]
    InvalidGas(String),

    #[error("speed {speed} is at or beyond the limit speed {limit} (c² = {c2})")]
    SpeedExceedsLimit { speed: f64, limit: f64, c2: f64 },

    #[error("invalid speed argument {0}")]
    InvalidSpeed(f64),

    #[error("no subsonic root: {0}")]
    NoSubsonicRoot(String),

    #[error("tolerance not reached after {iterations} iterations (residual {residual:e})")]
    ToleranceNotReached { iterations: usize, residual: f64 },

    #[error("hypothesis (H1) violated: {0}")]
    HypothesisViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node ({i}, {j}) outside a {nx}×{ny} grid")]
    IndexOutOfRange { i: usize, j: usize, nx: usize, ny: usize },

    #[error("Bernoulli closure undefined at node ({i}, {j}): speed² {speed_sq} ≥ limit² {limit_sq}")]
    SonicExceeded { i: usize, j: usize, speed_sq: f64, limit_sq: f64 },

    #[error("singular matrix: zero pivot in column {0}")]
    SingularMatrix(usize),

    #[error("zeroth-order coefficient c(P) = {0} violates the selected mode")]
    NonzeroC(f64),

    #[error("Hopf condition fails: βⁿ(O) = {0} is not positive")]
    ConditionFailed(f64),

    #[error("no barrier rectangle found after {0} shrink retries")]
    RectangleVanished(usize),

    #[error("point is not a strict boundary extremum: u(P) = {at_p}, sampled {found}")]
    NotAnExtremum { at_p: f64, found: f64 },
}
