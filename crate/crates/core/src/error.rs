use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("element is not hyperbolic (|trace| = {trace})")]
    NotHyperbolic { trace: f64 },
    #[error("principal logarithm is ambiguous (trace {trace})")]
    LogBranch { trace: f64 },
    #[error("ping-pong certificate not found: {0}")]
    PingPongFailed(String),
    #[error("base points coincide")]
    CoincidentBase,
    #[error("flow-back parameter t = {t} outside (-1/R, 0) for R = {r}")]
    InvalidParameter { t: f64, r: f64 },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("field is not contracting (k = {k})")]
    NotContracting { k: f64 },
    #[error("degenerate differential (smallest singular value {sigma:e})")]
    DegenerateDifferential { sigma: f64 },
    #[error("point lies outside the meshed tiling")]
    OutsideTiling,
    #[error("invariant signs do not satisfy the witness precondition: {0}")]
    Precondition(String),
    #[error("degenerate eigenframe configuration: {0}")]
    FrameDegenerate(String),
    #[error("linear program failed: {0}")]
    Solver(String),
    #[error("io: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{op}: {source}")]
    Context { op: String, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(op: &str) -> impl FnOnce(Error) -> Error + '_ {
        move |e| Error::Context { op: op.to_string(), source: Box::new(e) }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
