use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (shape, label, parameter range).
    #[error("usage error: {0}")]
    Usage(String),

    /// Fock truncation leaves more thermal mass outside the space than allowed.
    #[error("Fock cutoff n_max = {n_max} leaves tail mass {tail:.3e} >= {eps:.1e}; need n_max >= {required}")]
    CutoffTooSmall {
        n_max: usize,
        required: usize,
        tail: f64,
        eps: f64,
    },

    /// The adaptive integrator could not satisfy its error controls.
    #[error("integration failed at t = {t:.6e} s: {reason}")]
    Integration { t: f64, reason: String },

    /// K_q needs a strictly positive classical reference charge.
    #[error("gain undefined: classical reference charge {0:.3e} J is not positive")]
    UndefinedGain(f64),

    /// Efficiency needs strictly positive injected work.
    #[error("efficiency undefined: injected work {0:.3e} J is not positive")]
    UndefinedEfficiency(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
