use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid input: {0}")]
    Domain(String),

    /// Relaxation rates violate 2Γ ≥ γ (T₂ > 2T₁).
    #[error(
        "unphysical relaxation rates: 2Γ = {} < γ = {gamma_t1} (T2 > 2 T1); pass the override to allow it",
        2.0 * gamma_t2
    )]
    Unphysical { gamma_t2: f64, gamma_t1: f64 },

    /// A backward relaxation left the closed unit disk.
    #[error("preimage lies outside the unit disk (radius {radius})")]
    OutOfDisk { radius: f64 },

    #[error("integration left the unit disk at t = {time} (radius {radius})")]
    IntegrationBlowup { time: f64, radius: f64 },

    /// The polar angle (and everything derived from it) is undefined at r = 0.
    #[error("quantity undefined at the origin of the Bloch disk")]
    AtOrigin,

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
