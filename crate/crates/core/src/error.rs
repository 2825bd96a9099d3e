use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("corrupt mask: {0}")]
    CorruptMask(String),

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("propagation failed at frame {frame}: {reason}")]
    Propagation { frame: usize, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable name of the variant, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimensions(_) => "InvalidDimensions",
            Error::CorruptMask(_) => "CorruptMask",
            Error::EmptyMask(_) => "EmptyMask",
            Error::InvalidParam(_) => "InvalidParam",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Propagation { .. } => "PropagationError",
            Error::EmptyInput(_) => "EmptyInput",
            Error::InvalidInput(_) => "InvalidInput",
            Error::JudgeUnavailable(_) => "JudgeUnavailable",
            Error::Parse { .. } => "ParseError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
