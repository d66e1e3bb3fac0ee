use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unstable resonator: equivalent length {length_um} um must lie in (0, {radius_um}) um")]
    StabilityViolation { length_um: f64, radius_um: f64 },

    #[error("root not found: {0}")]
    RootNotFound(String),

    #[error("design infeasible: {0}")]
    DesignInfeasible(String),

    #[error("degenerate rates: decay constants {0:e} and {1:e} coincide")]
    DegenerateRates(f64, f64),

    #[error("invalid field profile: {0}")]
    InvalidProfile(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for numerical non-convergence,
    /// 4 for physically infeasible requests.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Io { .. } | Error::Parse { .. } => 2,
            Error::RootNotFound(_) | Error::NotConverged { .. } => 3,
            Error::StabilityViolation { .. }
            | Error::DesignInfeasible(_)
            | Error::DegenerateRates(..)
            | Error::InvalidProfile(_) => 4,
        }
    }
}
