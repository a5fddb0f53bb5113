use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The free (linear) evolution itself ceases to exist before the requested time.
    #[error("linear evolution blows up at t = {blowup_time}; requested t = {t}")]
    LinearBlowup { t: f64, blowup_time: f64 },

    #[error("quadrature stopped at estimate {estimate:e} with error {achieved:.3e} (target {target:.3e})")]
    Accuracy {
        estimate: f64,
        achieved: f64,
        target: f64,
    },

    #[error("value {value:e} outside the monotone range [{lo:e}, {hi:e}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("inadmissible profile: {0}")]
    Inadmissible(String),

    #[error("time step failed at t = {t:e} (dt = {dt:e}): {reason}")]
    StepFailure { t: f64, dt: f64, reason: String },

    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

impl Error {
    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Errors that come from asking a question outside the regime an operation covers.
    pub fn is_regime_error(&self) -> bool {
        matches!(
            self,
            Error::WrongRegime(_) | Error::Inapplicable(_) | Error::Inadmissible(_)
        )
    }

    /// Errors raised by the numerics (quadrature, root finding, time stepping).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Accuracy { .. }
                | Error::StepFailure { .. }
                | Error::LinearBlowup { .. }
                | Error::Range { .. }
                | Error::Domain(_)
        )
    }
}
