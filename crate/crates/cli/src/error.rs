use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure of a subcommand, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Assumption(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 = I/O, 2 = malformed input or config, 3 = model assumptions
    /// violated, 4 = solver did not converge.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Convergence(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Classifies a library error raised while processing `path`.
    pub(crate) fn from_core(path: Option<&Path>, err: klmdp::Error) -> Self {
        use klmdp::Error as E;
        match err {
            E::Parse { line, message } => CliError::Parse {
                path: path.map(Path::to_path_buf).unwrap_or_default(),
                message: if line > 0 { format!("line {line}: {message}") } else { message },
            },
            E::NoConvergence { .. } => CliError::Convergence(err.to_string()),
            other => CliError::Assumption(other.to_string()),
        }
    }
}

impl From<klmdp::Error> for CliError {
    fn from(err: klmdp::Error) -> Self {
        CliError::from_core(None, err)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
