use thiserror::Error;

/// Failures of the runner, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A library error with the pipeline stage that raised it.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: gmix_core::Error,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Malformed { path: String, message: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 for configuration errors, 3 for numerical failures, 4 for I/O and file-format failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } => match source {
                gmix_core::Error::Io(_) | gmix_core::Error::Format { .. } => 4,
                _ => 3,
            },
            CliError::Io { .. } | CliError::Malformed { .. } => 4,
        }
    }
}

/// Attaches a stage name to library errors.
pub fn stage(stage: &'static str) -> impl FnOnce(gmix_core::Error) -> CliError {
    move |source| CliError::Stage { stage, source }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
