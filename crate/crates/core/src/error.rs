use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("unknown PPE class: {0:?}")]
    UnknownClass(String),

    #[error("invalid thresholds for {class}: {reason}")]
    InvalidThresholds { class: String, reason: String },

    #[error("invalid threshold policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),

    #[error("frame {got} is not after previously observed frame {last}")]
    NonMonotonicFrame { last: u64, got: u64 },

    #[error("session already finished")]
    SessionFinished,

    #[error("malformed record{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    MalformedRecord { line: Option<usize>, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid stream source: {0}")]
    InvalidSource(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn malformed(reason: impl Into<String>) -> Self {
        Error::MalformedRecord {
            line: None,
            reason: reason.into(),
        }
    }

    /// Attach a 1-based line number to a record-level error.
    pub fn at_line(self, n: usize) -> Self {
        match self {
            Error::MalformedRecord { reason, .. } => Error::MalformedRecord {
                line: Some(n),
                reason,
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
