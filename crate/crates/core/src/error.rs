use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation supports.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive integration could not continue.
    #[error("integration failed at t = {t} ns: {reason}")]
    Integration { t: f64, reason: String },

    /// Floquet truncation too small: boundary Fourier components carry weight.
    #[error(
        "Floquet truncation J = {truncation} insufficient: boundary weight {boundary_weight:.3e}"
    )]
    Truncation {
        truncation: usize,
        boundary_weight: f64,
    },

    /// Input outside the validity regime of an approximation.
    #[error("out of regime: {0}")]
    Regime(String),

    /// A fit could not be attempted or did not produce a usable result.
    #[error("fit error: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
