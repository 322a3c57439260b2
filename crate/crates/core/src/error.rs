use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("integration produced a non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("separatrix tracing failed at theta = {theta}: y = {y}")]
    Tracing { theta: f64, y: f64 },

    #[error("lookup failed: {0}")]
    Lookup(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
