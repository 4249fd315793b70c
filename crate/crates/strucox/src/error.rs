use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const INVARIANT: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] strucox_core::Error),
    #[error("{0} fit(s) did not converge")]
    NonConvergence(usize),
    #[error("invariant violations: {}", .0.join("; "))]
    Invariant(Vec<String>),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input { .. } => exit::CONFIG,
            Self::Core(e) if is_input_error(e) => exit::CONFIG,
            Self::NonConvergence(_) => exit::NON_CONVERGENCE,
            Self::Invariant(_) => exit::INVARIANT,
            Self::Io { .. } | Self::Core(_) => exit::FAILURE,
        }
    }
}

/// Core errors caused by the supplied configuration or data rather than by
/// the numerics.
fn is_input_error(e: &strucox_core::Error) -> bool {
    use strucox_core::Error::*;
    matches!(
        e,
        NoRecords
            | InvalidRecord { .. }
            | CovariateOutOfBounds { .. }
            | InvalidStudyEnd(_)
            | DimensionMismatch { .. }
            | InvalidParameter { .. }
            | OutOfDomain { .. }
            | NotDifferentiable(_)
            | NoEvents
            | InvalidExponent(_)
            | EmptyGroup(_)
            | Unsupported(_)
            | MissingConstant(_)
    )
}

pub type Result<T> = std::result::Result<T, CliError>;
