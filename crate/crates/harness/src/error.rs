use std::path::PathBuf;

use thiserror::Error;

/// Harness errors. [`HarnessError::exit_code`] maps them to process exit codes.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("analysis assertion failed: {0}")]
    AnalysisFailed(String),
    #[error("malformed curve file {path}: {reason}")]
    MalformedCurve { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] stochq::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for a failed analysis assertion, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Core(
                stochq::Error::InvalidConfig(_)
                | stochq::Error::InvalidSpec(_)
                | stochq::Error::InvalidGranularity(_),
            ) => 2,
            Self::AnalysisFailed(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
