use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("divergent sensitivity: {0}")]
    DivergentSensitivity(String),
    #[error("no crossover: coupling is zero")]
    NoCrossover,
    #[error("no signal: {0}")]
    NoSignal(String),
    #[error("fit failed after {iterations} iterations (cost {cost:.4e}): {reason}")]
    FitFailure {
        iterations: usize,
        cost: f64,
        reason: String,
    },
    #[error("position unresolvable: {0}")]
    Unresolvable(String),
    #[error("channel count: expected {expected}, found {found}")]
    ChannelCount { expected: usize, found: usize },
    #[error("decode error: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DivergentSensitivity(_)
                | Error::NoCrossover
                | Error::NoSignal(_)
                | Error::FitFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
