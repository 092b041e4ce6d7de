use thiserror::Error;

/// Process exit codes. These are a stable contract.
pub mod exit {
    pub const OK: i32 = 0;
    /// NonCompliant or Incomplete verdict.
    pub const NOT_COMPLIANT: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const BIND: i32 = 3;
    pub const PARSE: i32 = 4;
}

#[derive(Error, Debug)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("bind: {0}")]
    Bind(String),

    #[error("input: {0}")]
    Parse(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Bind(_) => exit::BIND,
            CliError::Parse(_) => exit::PARSE,
        }
    }

    pub(crate) fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn parse(e: impl std::fmt::Display) -> Self {
        CliError::Parse(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
