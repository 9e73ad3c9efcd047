use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, StapError>;

#[derive(Debug, Error)]
pub enum StapError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The covariance handed to the weight solver could not be factored.
    #[error("estimator `{estimator}`: covariance matrix is numerically singular")]
    Singular { estimator: String },

    #[error("malformed data file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<StapError>,
    },
}

impl StapError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StapError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        StapError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The message followed by every underlying cause, joined with `: `.
    pub fn chain(&self) -> String {
        let mut text = self.to_string();
        let mut source = std::error::Error::source(self);
        while let Some(cause) = source {
            text.push_str(": ");
            text.push_str(&cause.to_string());
            source = cause.source();
        }
        text
    }

    /// Process exit code: 2 for configuration/input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            StapError::Config(_)
            | StapError::InvalidInput(_)
            | StapError::Dimension(_)
            | StapError::Format { .. } => 2,
            StapError::Numerical(_) | StapError::Singular { .. } => 3,
            StapError::Io { .. } => 1,
            StapError::Stage { source, .. } => source.exit_code(),
        }
    }
}

/// Attach a pipeline stage name to an error.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
