//! Error type shared across the simulator.

use thiserror::Error;

/// Everything that can go wrong while building or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    /// A state label outside the recognised alphabet (H, V, D, A, L, R).
    #[error("unknown polarization state label {0:?}")]
    UnknownStateLabel(String),

    /// A measurement-basis name outside the recognised alphabet (K, C).
    #[error("unknown measurement basis {0:?} (expected \"K\" or \"C\")")]
    UnknownBasis(String),

    /// A matrix or state failed a physicality check (normalisation,
    /// Hermiticity, positivity, unitarity).
    #[error("non-physical operand: {0}")]
    NonPhysical(String),

    /// A caller-supplied argument was out of range or inconsistent.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A modulation schedule violated a timing constraint.
    #[error("invalid modulation schedule: {0}")]
    InvalidSchedule(String),

    /// A configuration key was missing, unknown, or had a malformed value.
    #[error("config error for key {key:?}: {reason}")]
    Config { key: String, reason: String },

    /// Malformed report data (CSV or summary block) during parsing.
    #[error("report parse error: {0}")]
    ReportParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Convenience constructor for configuration errors.
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
