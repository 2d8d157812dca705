use alloc::string::String;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular evaluation at U = {at}")]
    Singularity { at: f64 },
    #[error("non-finite state during integration at t = {t}")]
    NonFinite { t: f64 },
    #[error("step size underflow (h = {h:e}) at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("too many steps ({steps}) before reaching t = {t}")]
    TooManySteps { t: f64, steps: usize },
    #[error("no return to the section before t = {t_max}")]
    NoReturn { t_max: f64 },
    #[error("tangential crossing of the section at t = {t}")]
    TangentialCrossing { t: f64 },
    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { iterations: usize, what: String },
    #[error("spectral error: {0}")]
    Spectral(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("field blew up at t = {t}")]
    BlowUp { t: f64 },
    #[error("not estimable: {0}")]
    NotEstimable(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Domain(_) | Error::Configuration(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
