use thiserror::Error;

#[derive(Debug, Error)]
pub enum RotorError {
    /// A parameter failed validation. `field` names the offending input.
    #[error("invalid `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    /// A runtime guard (norm drift, boundary leak, aliasing) tripped.
    #[error("numerical guard tripped at t = {t}: {reason}")]
    NumericalGuard { t: f64, reason: String },

    #[error("trajectory {index} (seed {seed:#018x}) aborted: {source}")]
    TrajectoryFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<RotorError>,
    },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RotorError {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        RotorError::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn guard(t: f64, reason: impl Into<String>) -> Self {
        RotorError::NumericalGuard {
            t,
            reason: reason.into(),
        }
    }

    /// True if this error (or the trajectory failure wrapping it) came from a
    /// numerical guard rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            RotorError::NumericalGuard { .. } => true,
            RotorError::TrajectoryFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, RotorError>;
