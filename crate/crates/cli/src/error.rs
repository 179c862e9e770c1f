use std::fmt;

use sweep_core::SweepError;

/// Command failures, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Validation(String),
    Numerical(SweepError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical error: {e}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Input problems are validation failures; everything raised while solving
/// is numerical.
impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidInput(_)
            | SweepError::DimensionMismatch(_)
            | SweepError::InfeasibleStart(_)
            | SweepError::InfeasiblePolyhedron(_)
            | SweepError::UnknownCatalogEntry(_)
            | SweepError::TimeOutOfRange { .. }
            | SweepError::DomainMismatch { .. }
            | SweepError::LevelTooLarge { .. } => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
