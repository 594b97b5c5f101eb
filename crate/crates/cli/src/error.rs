use std::fmt;

use flexts_core::Error as CoreError;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Data = 3,
    Numeric = 4,
}

impl ExitKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExitKind::Usage => "usage",
            ExitKind::Data => "data",
            ExitKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
    broken_pipe: bool,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Usage, message: message.into(), broken_pipe: false }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Data, message: message.into(), broken_pipe: false }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Numeric, message: message.into(), broken_pipe: false }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    /// The reader of our output went away, as with `| head`. Not worth
    /// reporting.
    pub fn is_broken_pipe(&self) -> bool {
        self.broken_pipe
    }
}

/// One line: `flexts: error[<kind>]: <message>`.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self.message.replace(['\n', '\r'], " ");
        write!(f, "flexts: error[{}]: {}", self.kind.tag(), flat)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match &e {
            e if e.is_numeric() => ExitKind::Numeric,
            CoreError::InvalidParameter(_) | CoreError::UnknownScenario(_) | CoreError::OutOfScope(_) => {
                ExitKind::Usage
            }
            _ => ExitKind::Data,
        };
        Self { kind, message: e.to_string(), broken_pipe: false }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        let broken_pipe = e.kind() == std::io::ErrorKind::BrokenPipe;
        Self { broken_pipe, ..CliError::data(format!("io: {e}")) }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                return io.into();
            }
            unreachable!("is_io_error");
        }
        CliError::data(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
