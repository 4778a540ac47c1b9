use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Exit statuses of the `hetalloc` binary.
pub mod exit {
    pub const DOMAIN: u8 = 1;
    pub const IO: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const TIMEOUT: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{0}")]
    Usage(String),
    /// Domain-level rejection; the details were already reported.
    #[error("{0}")]
    Domain(String),
    #[error("no feasible allocation")]
    Infeasible,
    #[error("time limit reached before optimality was proven")]
    Timeout,
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Usage(_) => exit::IO,
            CliError::Domain(_) => exit::DOMAIN,
            CliError::Infeasible => exit::INFEASIBLE,
            CliError::Timeout => exit::TIMEOUT,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}
