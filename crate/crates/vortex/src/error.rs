use std::path::PathBuf;

/// Failures of the batch driver, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{module}::{operation} failed at t = {time}: {source}")]
    Numerical {
        module: &'static str,
        operation: &'static str,
        time: f64,
        #[source]
        source: vortex_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 configuration, 3 numerical failure, 4 I/O or file format.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } | CliError::Format { .. } => 4,
        }
    }
}

/// Attaches the failing module, operation and simulation time to a core error.
pub(crate) trait Context<T> {
    fn during(self, module: &'static str, operation: &'static str, time: f64) -> Result<T, CliError>;
}

impl<T> Context<T> for vortex_core::Result<T> {
    fn during(self, module: &'static str, operation: &'static str, time: f64) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical {
            module,
            operation,
            time,
            source,
        })
    }
}
