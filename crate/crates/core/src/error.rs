use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The Sylvester operator `X -> AX + XA^T` is singular (eigenvalue pair summing to zero).
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("system is not asymptotically stable (spectral abscissa {abscissa:.6e}){hint}")]
    Instability { abscissa: f64, hint: String },

    #[error("projection is degenerate: W^T V is singular (condition number {condition:.3e})")]
    ProjectionDegenerate { condition: f64 },

    #[error("frequency {re} + {im}i is a pole of the system")]
    Pole { re: f64, im: f64 },

    #[error("time {0} is outside the domain t >= 0")]
    Domain(f64),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem is likely stiff, use the backward Euler integrator")]
    Stiffness { t: f64, h: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Condition `max ||M_i|| * ||Sigma_E||_inf < 1` is violated, so the a-posteriori bound does not apply.
    #[error("error bound not applicable: condition value {condition_value:.6e} >= 1")]
    BoundInapplicable { condition_value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn unstable(abscissa: f64) -> Self {
        Error::Instability {
            abscissa,
            hint: String::new(),
        }
    }
}
