use thiserror::Error;

/// Errors raised by the estimation and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation (e.g. a nonpositive observation).
    #[error("domain error: {0}")]
    Domain(String),

    /// Log-gamma evaluated at a pole.
    #[error("log-gamma pole at z = {0}")]
    Pole(f64),

    /// The noise Mellin transform does not exist at the requested development point.
    #[error("inadmissible development point: {0}")]
    Admissibility(String),

    /// Invalid configuration or parameter values.
    #[error("invalid input: {0}")]
    Validation(String),

    /// No cutoff candidate satisfies the variance constraint.
    #[error("empty candidate grid: {0}")]
    EmptyGrid(String),

    /// Adaptive quadrature did not converge; usually a sign that the integral diverges.
    #[error("quadrature did not converge: {0}")]
    Divergent(String),

    /// A numerical diagnostic tripped (e.g. a non-negligible imaginary residue).
    #[error("numerical diagnostic: {0}")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Drift matrix has an eigenvalue with nonnegative real part.
    #[error("unstable drift matrix: {0}")]
    Instability(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Same variant with `ctx` prefixed to the message; a pole becomes a numerical error.
    pub fn context(self, ctx: &str) -> Error {
        match self {
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Pole(z) => Error::Numerical(format!("{ctx}: log-gamma pole at z = {z}")),
            Error::Admissibility(m) => Error::Admissibility(format!("{ctx}: {m}")),
            Error::Validation(m) => Error::Validation(format!("{ctx}: {m}")),
            Error::EmptyGrid(m) => Error::EmptyGrid(format!("{ctx}: {m}")),
            Error::Divergent(m) => Error::Divergent(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("{ctx}: {m}")),
            Error::OutOfRange(m) => Error::OutOfRange(format!("{ctx}: {m}")),
            Error::Instability(m) => Error::Instability(format!("{ctx}: {m}")),
        }
    }
}
