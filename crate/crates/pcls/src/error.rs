use thiserror::Error;

/// Errors produced by model construction, evaluation, and simulation.
#[derive(Debug, Error)]
pub enum PclsError {
    /// A model description failed validation. `path` points at the offending
    /// field in JSON-path notation (e.g. `pc.rho`, `ls.psi[0].weights`).
    #[error("invalid model spec at {path}: {message}")]
    InvalidSpec { path: String, message: String },

    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exponential-envelope evaluation would overflow `f64`.
    #[error("envelope overflow in {context}: rate {rate} at argument {arg}")]
    Overflow {
        context: &'static str,
        rate: f64,
        arg: f64,
    },

    /// A frequency grid leaves too much spectral mass uncovered.
    #[error("spectral grid covers too little mass: tail mass {tail_mass:e} exceeds {tol:e}")]
    Coverage { tail_mass: f64, tol: f64 },

    /// A matrix that must be positive semidefinite is not, beyond tolerance.
    #[error(
        "matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e} \
         below -{tol:e} * trace (trace {trace:e})"
    )]
    NonPsd {
        min_eigenvalue: f64,
        trace: f64,
        tol: f64,
    },

    /// An interval endpoint does not coincide with any grid cell boundary.
    #[error("interval not aligned to grid: {0}")]
    Alignment(String),

    /// The requested simulation method cannot be applied to this model.
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    /// A numeric routine failed (no convergence, invalid value, residual too large).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PclsError>;
