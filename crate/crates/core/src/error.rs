use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LoheError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("reduction violation at t = {time}: residual {residual:e} exceeds {tolerance:e}")]
    ReductionViolation {
        time: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("phase sampling too coarse at t = {time}: increment {increment} rad")]
    PhaseAliasing { time: f64, increment: f64 },

    #[error("fit domain error: {0}")]
    FitDomain(String),

    #[error("integration fault at t = {time}: {reason}")]
    IntegrationFault { time: f64, reason: String },

    #[error("infeasible initial-data target: {0}")]
    Infeasible(String),
}

pub type Result<T, E = LoheError> = std::result::Result<T, E>;
