use alloc::string::String;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid tag stream: {0}")]
    InvalidStream(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("fit did not converge after {iterations} iterations (residual norm {residual_norm:.6e})")]
    FitNonConvergence { iterations: usize, residual_norm: f64 },
    #[error("visibility undefined: {0}")]
    UndefinedVisibility(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
