use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {msg}")]
    Parse { path: PathBuf, line: usize, column: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] phantom_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 3 when the simulator broke one of its own
    /// invariants, 2 for anything wrong with the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Sim(e) if e.is_internal() => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
