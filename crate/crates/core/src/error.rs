use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("unsupported form/space pairing: {0}")]
    Unsupported(String),

    #[error("constraint block {block} is rank deficient")]
    RankDeficient { block: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("iterative solver stopped after {iterations} iterations with relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("newton iteration did not converge within {iterations} iterations (last increment {increment:.3e})")]
    NewtonDiverged { iterations: usize, increment: f64 },

    #[error("step size underflow: tau = {tau:.3e}")]
    StepSizeUnderflow { tau: f64 },

    #[error("coincident points: tangent-point radius undefined")]
    CoincidentPoints,

    #[error("energy increased by {increase:.3e} in a conditionally stable step")]
    EnergyIncrease { increase: f64 },

    #[error("flow step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
