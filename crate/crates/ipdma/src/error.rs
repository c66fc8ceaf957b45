use ipdma_core::Error;

/// Failure of a command, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Schema(_)
            | Error::Row { .. }
            | Error::Validation(_)
            | Error::DegeneratePrior(_)
            | Error::EmptyDraws => CliError::Data(msg),
            Error::Numerical { .. } | Error::DegeneratePosterior(_) | Error::UndefinedMetric(_) => {
                CliError::Numerical(msg)
            }
            Error::IndexOutOfRange { .. }
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::UnknownMethod { .. }
            | Error::Config(_) => CliError::Usage(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
