use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum Error {
    #[error("rate parameter {name} must be positive (got {value})")]
    NonPositiveRate { name: &'static str, value: f64 },

    #[error("coupling kappa must be non-negative (got {0})")]
    NegativeCoupling(f64),

    #[error("parameter {name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },

    #[error("Bloch angle {0} outside [0, pi]")]
    OutOfRangeAngle(f64),

    #[error("operation requires the resonant case omega == omega_c == omega_w")]
    NotResonant,

    #[error("characteristic roots are degenerate (relative separation {0:.3e}); use the ODE fallback")]
    DegenerateRoots(f64),

    #[error("ODE integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("gamma_w = {0} is outside the domain of this boundary curve")]
    OutOfDomain(f64),

    #[error("boundary formula produced kappa^2 = {0} < 0")]
    NegativeKappaSquared(f64),

    #[error("tangency solve did not converge: {0}")]
    NoConvergence(String),

    #[error("time grid invalid: {0}")]
    InvalidGrid(String),

    #[error("coefficient series has a pole at t = {0} inside the integration window")]
    PoleInWindow(f64),

    #[error("density matrix lost positivity at t = {t} (min eigenvalue {min_eigenvalue:.3e})")]
    PositivityLost { t: f64, min_eigenvalue: f64 },

    #[error("{0}")]
    InvalidInput(String),
}
