use thiserror::Error;

/// Errors raised by the Gaussian engine, the executor and the Fock oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode index {mode} out of range for a {num_modes}-mode state")]
    ModeOutOfRange { mode: usize, num_modes: usize },

    #[error("two-mode operation needs distinct modes, got {0} twice")]
    SameMode(usize),

    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("matrix is not symplectic: max |S Ω Sᵀ - Ω| = {defect:e}")]
    NotSymplectic { defect: f64 },

    #[error("channel violates complete positivity: minimum eigenvalue {min_eigenvalue:e}")]
    CpViolation { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("outcome probability {probability:e} is below the underflow floor")]
    DegenerateOutcome { probability: f64 },

    /// Conditioning on a photodetector click leaves the Gaussian manifold.
    #[error("non-Gaussian outcome (p_absorb = {p_absorb}): {citation}")]
    NonGaussianOutcome { p_absorb: f64, citation: String },

    #[error("non-Gaussian input state on mode `{mode}`: {citation}")]
    NonGaussianInput { mode: String, citation: String },

    #[error("non-Gaussian gate `{gate}`: {citation}")]
    NonGaussianGate { gate: String, citation: String },

    /// Parse or validation diagnostics, one per line.
    #[error("invalid program:\n{0}")]
    InvalidProgram(String),

    #[error("register `{0}` has no recorded outcome")]
    UnknownRegister(String),

    #[error("mode `{0}` is not alive")]
    DeadMode(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("truncation leakage {leakage:e} exceeds budget {budget:e}")]
    TruncationBudgetExceeded { leakage: f64, budget: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}
