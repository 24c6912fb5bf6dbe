//! Error type shared by every module of the library.

use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A required capability (for example a derivative evaluator) is missing.
    #[error("capability error: {0}")]
    Capability(String),

    /// The requested tolerance could not be reached within the node budget.
    #[error("accuracy error: requested {requested:e}, achieved bound {achieved:e}")]
    Accuracy { requested: f64, achieved: f64 },

    /// Distribution construction failed because a constraint cannot be met.
    #[error("construction error: {0}")]
    Construction(String),

    /// Steps were applied out of order or past the terminal time.
    #[error("sequencing error: {0}")]
    Sequencing(String),

    /// The caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data cannot be processed (non-positive errors in a log fit, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Extrapolation levels are inconsistent with a monotone power law.
    #[error("extrapolation unreliable: {0}")]
    Extrapolation(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
