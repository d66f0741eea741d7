use std::path::PathBuf;

use lattice_extinction::Error;

/// Exit codes of `lattice-sim`.
pub const EXIT_OK: u8 = 0;
/// Some checked assertion failed.
pub const EXIT_ASSERTION: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Config {
        path: String,
        line: Option<usize>,
        message: String,
    },

    #[error("{0}")]
    Engine(Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Engine(e) if e.is_numeric_guard() => EXIT_NUMERIC,
            CliError::Engine(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_CONFIG,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}
