use std::fmt;

use qconc::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Usage = 1,
    Parse = 2,
    Hypothesis = 3,
    Numeric = 4,
    Infeasible = 5,
    VerifyFailed = 6,
}

#[derive(Debug)]
pub struct CliError {
    pub code: Code,
    pub message: String,
}

impl CliError {
    pub fn new(code: Code, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Code::Usage, message)
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(Code::Parse, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn code_of(e: &Error) -> Code {
    match e {
        Error::DimensionMismatch { .. }
        | Error::NotSelfadjoint { .. }
        | Error::InvalidState(_)
        | Error::InvalidChannel(_)
        | Error::InvalidGenerator(_)
        | Error::UnravellingMismatch(_) => Code::Parse,
        Error::InvalidArgument(_) => Code::Usage,
        Error::StateNotFaithful { .. }
        | Error::NonUniqueFixedPoint(_)
        | Error::NoFixedPoint
        | Error::InconclusiveIrreducibility(_)
        | Error::Reducible
        | Error::HypothesisFailed(_)
        | Error::NotInvariant { .. }
        | Error::NotCentered(_)
        | Error::PositiveRecurrenceFails => Code::Hypothesis,
        Error::FilterCollapse | Error::Numerical(_) => Code::Numeric,
        Error::Rationalization(_) | Error::Infeasible(_) => Code::Infeasible,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(code_of(&e), e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
