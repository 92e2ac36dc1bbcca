use thiserror::Error;

use crate::critical_set::Diagnostics;
use crate::flow::FlowTrace;

pub type Result<T> = std::result::Result<T, SteinerError>;

#[derive(Debug, Error)]
pub enum SteinerError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} contains a non-finite value")]
    NonFinite { what: String },

    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A configuration field failed validation. `field` is a dotted path such as `potential.p`.
    #[error("invalid configuration `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("numerical failure after {} samples: {reason}", .partial.samples.len())]
    NumericalFailure { reason: String, partial: Box<FlowTrace> },

    #[error(
        "no critical point found ({} traces: {} stalled, {} hit max_steps, {} failed)",
        .diagnostics.testing_points,
        .diagnostics.stalled,
        .diagnostics.max_steps,
        .diagnostics.failed
    )]
    NoCriticalPoint { diagnostics: Diagnostics },
}

impl SteinerError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SteinerError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
