use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or semantically invalid problem config.
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    /// A state or time outside the declared domain of a flow or cost.
    #[error("domain violation: {0}")]
    Domain(String),

    /// Discretization grid cannot represent the instance.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// A postcondition the algorithm relies on failed; names the witness.
    #[error("internal assertion failed: {0}")]
    Assertion(String),

    /// Simplex could not find a usable pivot within tolerance.
    #[error("degenerate pivot: {message} (last pivots: {log:?})")]
    DegeneratePivot {
        message: String,
        log: Vec<(usize, usize, usize)>,
    },

    /// An enumeration guard was exceeded.
    #[error("guard exceeded: {0}")]
    Guard(String),
}

impl Error {
    pub fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
