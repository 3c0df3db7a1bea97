use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] pitchdsp_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed container: {0}")]
    Container(String),
    #[error("malformed labels at line {line}: {reason}")]
    Labels { line: usize, reason: String },
    /// Bad flags, config keys or option values; maps to the usage exit code.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    OutOfRange(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 for usage and configuration problems, 2 for
    /// everything that goes wrong with the data.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
