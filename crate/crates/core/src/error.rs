use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grids or sample times differ: {0}")]
    GridMismatch(String),

    #[error("non-finite field value at t = {t}")]
    NonFiniteField { t: f64 },

    #[error("singular coefficient near a density node at x = {x}, t = {t}")]
    SingularCoefficient { x: f64, t: f64 },

    #[error("winding loop is ambiguous: accumulated phase is {turns} turns")]
    LoopAmbiguous { turns: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed data file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable category, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InfeasibleParameters(_) => "infeasible-parameters",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::NonFiniteField { .. } => "non-finite-field",
            Error::SingularCoefficient { .. } => "singular-coefficient",
            Error::LoopAmbiguous { .. } => "loop-ambiguous",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Config(_) => "config-parse",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Format(_) => 3,
            Error::InfeasibleParameters(_) | Error::InvalidArgument(_) | Error::InvalidGrid(_) => 4,
            _ => 5,
        }
    }
}
