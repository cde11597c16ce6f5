use thiserror::Error;

/// Errors raised by the busy-cycle library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported moment: {0} is not available for this distribution")]
    UnsupportedMoment(&'static str),

    #[error("accuracy target not met: best estimate {estimate:e}, achieved error {achieved:e}")]
    Accuracy { estimate: f64, achieved: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("class violation: {class} bound requires a distribution tagged {required}")]
    ClassViolation { class: String, required: String },

    #[error("arrival rate mismatch: distribution built for lambda={service}, queue has lambda={queue}")]
    RateMismatch { service: f64, queue: f64 },

    #[error("runaway busy period: more than {0} arrivals in one cycle")]
    Runaway(u64),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
