use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular metric: condition number {cond:.3e} exceeds cap")]
    SingularMetric { cond: f64 },

    #[error("fields live on different charts")]
    ChartMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("gradient bound blows up at t = {horizon} (requested t = {t})")]
    BlowupTime { t: f64, horizon: f64 },

    #[error("psi is undefined for lambda = 0; use the flat closed form")]
    LambdaZero,

    #[error("psi has negative base {base:.6e}; use the cleared invariant")]
    NegativeBase { base: f64 },

    #[error("step rejected at t = {t}: metric lost positive definiteness after {halvings} halvings")]
    StepRejected { t: f64, halvings: u32 },

    #[error("step size underflow at t = {t} (dt = {dt:.3e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
