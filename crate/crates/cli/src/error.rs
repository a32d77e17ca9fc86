use std::io;
use std::path::Path;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sta_core::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("cannot parse config file {path}: {message}")]
    ConfigFile { path: String, message: String },

    #[error("{0}")]
    Unanswerable(String),
}

impl CliError {
    pub fn file(path: &Path, source: io::Error) -> Self {
        CliError::File {
            path: path.display().to_string(),
            source,
        }
    }

    /// 0 success, 2 usage or configuration problems (including missing input
    /// files and unknown keys), 3 unanswerable query, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        use sta_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::ConfigFile { .. } => 2,
            CliError::Unanswerable(_) => 3,
            CliError::File { source, .. } => missing_file_code(source),
            CliError::Core(e) => match e {
                E::File { source, .. } => missing_file_code(source),
                E::UnknownPattern { .. } => 3,
                E::MostlyMalformed { .. }
                | E::Format(_)
                | E::Config(_)
                | E::TooFewPoints { .. }
                | E::Empty(_)
                | E::UnknownKey { .. }
                | E::NoContent(_)
                | E::NoColdStart { .. }
                | E::ModelFile(_) => 2,
                E::Io(_) | E::IdOutOfRange { .. } | E::Diverged { .. } => 1,
            },
        }
    }
}

fn missing_file_code(e: &io::Error) -> u8 {
    match e.kind() {
        io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied => 2,
        _ => 1,
    }
}
