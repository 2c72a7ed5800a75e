//! Process exit codes and the error type that carries them.

use std::fmt;

pub const USAGE: u8 = 2;
pub const IO: u8 = 3;
pub const PARSE: u8 = 4;
pub const CONFIG: u8 = 5;
pub const CHECKPOINT: u8 = 6;
pub const INFERENCE: u8 = 7;
pub const VERIFICATION: u8 = 8;
pub const TRAINING: u8 = 9;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }

    pub fn msg(code: u8, message: impl fmt::Display) -> Self {
        Self::new(code, anyhow::anyhow!("{message}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub trait Code<T> {
    fn code(self, code: u8) -> CliResult<T>;
    fn code_ctx(self, code: u8, context: impl fmt::Display + Send + Sync + 'static) -> CliResult<T>;
}

impl<T, E> Code<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn code(self, code: u8) -> CliResult<T> {
        self.map_err(|e| Failure::new(code, e))
    }

    fn code_ctx(self, code: u8, context: impl fmt::Display + Send + Sync + 'static) -> CliResult<T> {
        self.map_err(|e| Failure::new(code, e.into().context(context)))
    }
}
