use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("audit log has no entry for user {user} at t = {t}")]
    MissingCell { t: usize, user: usize },
    #[error("audit log has more than one entry for user {user} at t = {t}")]
    DuplicateCell { t: usize, user: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::MissingCell { .. } | CliError::DuplicateCell { .. } | CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

fn innermost(e: &polarcap::Error) -> &polarcap::Error {
    match e {
        polarcap::Error::AtRound { source, .. } | polarcap::Error::AtSeed { source, .. } => innermost(source),
        other => other,
    }
}

impl From<polarcap::Error> for CliError {
    fn from(e: polarcap::Error) -> Self {
        use polarcap::Error as E;
        let msg = e.to_string();
        match innermost(&e) {
            E::InvalidParams(_) | E::PreconditionViolated(_) | E::HorizonTooSmall { .. } => CliError::Usage(msg),
            E::Lp(_) | E::StateMismatch(_) | E::MixedArmsForRobust => CliError::Numerical(msg),
            _ => CliError::Data(msg),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
