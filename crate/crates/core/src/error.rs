//! Error taxonomy shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid configuration value or malformed config text.
    #[error("config error: {0}")]
    Config(String),

    /// An operation received input outside its domain (e.g. negative density).
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear solve failed to reach the requested residual.
    #[error("solver error: {0}")]
    Solver(String),

    /// A field left the admissible range during time stepping.
    #[error("blow-up at t={time}: {what}")]
    Blowup { time: f64, what: String },

    /// Two trajectories do not share a time grid or mesh.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Convergence-order fit rejected its input.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Exit-status category used by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            SimError::Config(_) | SimError::Domain(_) | SimError::Fit(_) => "config",
            SimError::Solver(_) | SimError::Alignment(_) => "solver",
            SimError::Blowup { .. } => "blowup",
            SimError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
